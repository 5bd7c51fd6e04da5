// Times rollout-wave collection with the OpenMP path against the serial
// reference and checks they produce identical groups.

#include <chrono>
#include <cstdlib>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "decs/config.hpp"
#include "decs/trainer.hpp"

int main(int argc, char** argv) {
    const int waves = argc > 1 ? std::atoi(argv[1]) : 8;
    const int groups_per_wave = argc > 2 ? std::atoi(argv[2]) : 64;

    decs::Config cfg = decs::Config::from_string("seed = 20240817\n", "<bench>");
    decs::Trainer trainer(cfg);

    using clock = std::chrono::steady_clock;
    auto run = [&](bool serial) {
        const auto t0 = clock::now();
        long rollouts = 0;
        for (int w = 0; w < waves; ++w) {
            const auto wave = trainer.sample_wave(trainer.policy(), /*step=*/w + 1,
                                                  /*first_attempt=*/0, groups_per_wave, serial);
            for (const auto& g : wave) rollouts += static_cast<long>(g.rollouts.size());
        }
        const double secs = std::chrono::duration<double>(clock::now() - t0).count();
        return std::pair<double, long>(secs, rollouts);
    };

    const auto [serial_s, n_serial] = run(true);
    const auto [parallel_s, n_parallel] = run(false);

    bool identical = true;
    for (int w = 0; w < waves && identical; ++w) {
        const auto a = trainer.sample_wave(trainer.policy(), w + 1, 0, groups_per_wave, true);
        const auto b = trainer.sample_wave(trainer.policy(), w + 1, 0, groups_per_wave, false);
        for (size_t i = 0; i < a.size() && identical; ++i)
            for (size_t j = 0; j < a[i].rollouts.size() && identical; ++j)
                identical = a[i].rollouts[j].tokens == b[i].rollouts[j].tokens;
    }

    int threads = 1;
#ifdef _OPENMP
#pragma omp parallel
#pragma omp single
    threads = omp_get_num_threads();
#endif

    std::cout << "rollouts per run:   " << n_serial << "\n";
    std::cout << "serial:             " << serial_s << " s  (" << n_serial / serial_s
              << " rollouts/s)\n";
    std::cout << "parallel (" << threads << " thr):   " << parallel_s << " s  ("
              << n_parallel / parallel_s << " rollouts/s)\n";
    std::cout << "speedup:            " << serial_s / parallel_s << "x\n";
    std::cout << "identical output:   " << (identical ? "yes" : "NO") << "\n";
    return identical ? 0 : 1;
}
