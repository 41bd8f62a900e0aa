// SPDX-License-Identifier: Apache-2.0
#include <guimig/cli.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    return guimig::run_cli(argc, argv, std::cout, std::cerr);
}
