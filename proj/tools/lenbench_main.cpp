#include "lenbench/cli.hpp"

int main(int argc, char ** argv) {
    return lenbench::run_cli(argc, argv);
}
