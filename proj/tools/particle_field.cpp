// Copyright Contributors to the particle_field project
// SPDX-License-Identifier: Apache-2.0

#include <particle_field/cli.hpp>

int
main(int argc, char **argv) {
    return pfield::runCli(argc, argv);
}
