#include "brw/config.hpp"

int main(int argc, char** argv) { return brw::cli_main(argc, argv); }
