// Scores every corruptor's magnitude ladder on seeded room scenes and counts
// the scenes whose ladder rises strictly. Usage: corruption_sweep [scenes]

#include <cstdio>
#include <cstdlib>
#include <string>

#include "geoscore/consistency_score.hpp"
#include "geoscore/synthetic_oracle.hpp"

int main(int argc, char** argv) {
  using namespace geoscore;
  const int scenes = argc > 1 ? std::atoi(argv[1]) : 5;
  const oracle::Trajectory trajs[] = {oracle::Trajectory::kOrbit, oracle::Trajectory::kDolly,
                                      oracle::Trajectory::kLateral};

  for (auto kind : oracle::kAllCorruptions) {
    const auto ladder = oracle::magnitude_ladder(kind);
    std::printf("%s  ladder {%g, %g, %g, %g}\n", std::string(oracle::to_string(kind)).c_str(), ladder[0], ladder[1],
                ladder[2], ladder[3]);
    int rising = 0;
    for (int s = 0; s < scenes; ++s) {
      const auto seed = static_cast<std::uint64_t>(1000 + s);
      const auto base = oracle::render_scene(oracle::make_room_scene(seed, trajs[s % 3]));
      std::printf("  scene %llu:", static_cast<unsigned long long>(seed));
      double prev = -1.0;
      bool strict = true;
      for (double m : ladder) {
        const double e = score(oracle::corrupt(base, {kind, m, seed})).e_recon;
        strict = strict && e > prev;
        prev = e;
        std::printf(" %.6f", e);
      }
      rising += strict;
      std::printf("%s\n", strict ? "" : "  (not strictly increasing)");
    }
    std::printf("  strictly increasing on %d/%d scenes\n", rising, scenes);
  }
  return 0;
}
