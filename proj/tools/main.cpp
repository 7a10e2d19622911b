#include "mtm/harness.hpp"

int main(int argc, char** argv) { return mtm::cli_main(argc, argv); }
