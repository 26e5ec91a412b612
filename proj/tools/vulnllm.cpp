#include "vulnllm/cli.hpp"

int main(int argc, char** argv) { return vulnllm::cli::run(argc, argv); }
