// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

// Regenerates the shipped demo head container and prints its FNV-1a checksum.

#include "splatctl/container.hpp"
#include "splatctl/surface.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char **argv) {
    CLI::App app{"Build the procedural demo head surface container"};
    std::string out = "assets/demo_head.gsrf";
    app.add_option("--out", out, "Output path")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    const auto model = splatctl::make_demo_head();
    splatctl::save_surface(model, out);
    const auto bytes = splatctl::container::read_file_bytes(out);
    std::cout << "path=" << out << " vertices=" << model.num_vertices() << " faces=" << model.num_faces()
              << " n_shape=" << model.n_shape << " n_expr=" << model.n_expr
              << " fnv1a64=" << splatctl::container::hex64(splatctl::container::fnv1a64(bytes)) << "\n";
    return 0;
}
