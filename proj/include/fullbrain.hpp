#pragma once

#include "fullbrain/bench.hpp"
#include "fullbrain/distance_index.hpp"
#include "fullbrain/engine.hpp"
#include "fullbrain/error.hpp"
#include "fullbrain/graph.hpp"
#include "fullbrain/leaderboard.hpp"
#include "fullbrain/service.hpp"
#include "fullbrain/stats.hpp"
#include "fullbrain/suggest.hpp"
#include "fullbrain/text_index.hpp"
