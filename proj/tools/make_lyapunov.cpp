// Generate the shipped L1 planar Lyapunov orbit table by differential correction.

#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "robust_lt/errors.hpp"
#include "robust_lt/orbit.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Differentially corrected L1 planar Lyapunov orbit table"};
    double mu = 0.01215;
    double amplitude = 0.02;
    int samples = 401;
    std::string output = "l1_lyapunov.txt";
    app.add_option("--mu", mu, "mass parameter");
    app.add_option("--amplitude", amplitude, "x-axis offset Earthward of L1 (DU)");
    app.add_option("--samples", samples, "odd number of samples over one period");
    app.add_option("-o,--output", output, "output table path");
    CLI11_PARSE(app, argc, argv);

    try {
        robust_lt::DynamicsParams params;
        params.mu = mu;
        const auto orbit = robust_lt::correct_l1_lyapunov(params, amplitude);
        const auto table = robust_lt::sample_lyapunov(params, orbit, samples);
        table.save(output);
        std::cout << std::setprecision(17) << "x0 " << orbit.x0 << " vy0 " << orbit.vy0
                  << " period " << orbit.period << '\n';
    } catch (const robust_lt::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
