#include "fullbrain/cli.hpp"

int main(int argc, char** argv) { return fullbrain::cli::dispatch(argc, argv); }
