#include <iostream>

#include "agentnet/cli.hpp"

int main(int argc, char** argv)
{
    return agentnet::run_cli(argc, argv, std::cout, std::cerr);
}
