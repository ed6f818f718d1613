#pragma once

// Text file formats, deterministic system generators, and the RNG used for
// reproducible particle sets.
//
//   particle file:  line 1 "N", line 2 "box Lx Ly Lz", then "q x y z" rows
//   potentials.txt: one potential per line
//   forces.txt:     "Fx Fy Fz" per line
//   key=value files: fixed key order, one pair per line
//
// All floating-point output uses %.17g so files round-trip bit-exactly.

#include "system.hpp"

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace esp {

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// splitmix64: tiny, seedable, identical across platforms.
struct Rng {
    std::uint64_t state;
    explicit Rng(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        state += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }  // [0,1)
};

inline std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

enum class SystemKind { random, rocksalt, water_like };

inline const char* to_string(SystemKind k) {
    switch (k) {
        case SystemKind::random: return "random";
        case SystemKind::rocksalt: return "rocksalt";
        default: return "water-like-lattice";
    }
}

inline SystemKind system_kind_from_string(const std::string& s) {
    if (s == "random") return SystemKind::random;
    if (s == "rocksalt") return SystemKind::rocksalt;
    if (s == "water-like-lattice" || s == "water-like" || s == "water")
        return SystemKind::water_like;
    throw std::invalid_argument("unknown system kind: " + s);
}

struct GeneratorSpec {
    SystemKind kind = SystemKind::random;
    std::size_t N = 0;
    Vec3 box{0.0, 0.0, 0.0};
    std::uint64_t seed = 1;
};

// Deterministic systems: identical spec -> identical particles, bit for bit.
inline ParticleSystem generate_system(const GeneratorSpec& spec) {
    if (spec.N < 2) throw std::invalid_argument("generate_system: N must be >= 2");
    for (double L : spec.box)
        if (!(L > 0.0)) throw std::invalid_argument("generate_system: invalid box");
    ParticleSystem s;
    s.box = spec.box;
    s.q.reserve(spec.N);
    s.pos.reserve(spec.N);

    switch (spec.kind) {
        case SystemKind::random: {
            if (spec.N % 2 != 0)
                throw std::invalid_argument(
                    "generate_system: random +-1 charges need even N");
            Rng rng(spec.seed);
            for (std::size_t i = 0; i < spec.N; ++i) {
                Vec3 p;
                for (int d = 0; d < 3; ++d) p[d] = spec.box[d] * rng.uniform();
                s.pos.push_back(p);
                s.q.push_back(i % 2 == 0 ? 1.0 : -1.0);
            }
            break;
        }
        case SystemKind::rocksalt: {
            auto m = static_cast<std::size_t>(std::llround(std::cbrt(double(spec.N))));
            if (m * m * m != spec.N || m % 2 != 0)
                throw std::invalid_argument(
                    "generate_system: rocksalt N must be m^3 with even m");
            Vec3 a{spec.box[0] / m, spec.box[1] / m, spec.box[2] / m};
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < m; ++j)
                    for (std::size_t k = 0; k < m; ++k) {
                        s.pos.push_back(Vec3{i * a[0], j * a[1], k * a[2]});
                        s.q.push_back((i + j + k) % 2 == 0 ? 1.0 : -1.0);
                    }
            break;
        }
        case SystemKind::water_like: {
            auto m =
                static_cast<std::size_t>(std::llround(std::cbrt(double(spec.N) / 3.0)));
            if (3 * m * m * m != spec.N)
                throw std::invalid_argument(
                    "generate_system: water-like N must be 3*m^3");
            Vec3 a{spec.box[0] / m, spec.box[1] / m, spec.box[2] / m};
            double amin = std::min({a[0], a[1], a[2]});
            // 3-site neutral motif: one -2*delta site, two +delta sites offset
            // like a bent molecule; identical orientation on every cell.
            const double delta = 0.4238;
            const Vec3 o1{0.10 * amin, 0.074 * amin, 0.0};
            const Vec3 o2{-0.10 * amin, 0.074 * amin, 0.0};
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < m; ++j)
                    for (std::size_t k = 0; k < m; ++k) {
                        Vec3 c{(i + 0.5) * a[0], (j + 0.5) * a[1], (k + 0.5) * a[2]};
                        s.pos.push_back(c);
                        s.q.push_back(-2.0 * delta);
                        s.pos.push_back(Vec3{c[0] + o1[0], c[1] + o1[1], c[2] + o1[2]});
                        s.q.push_back(delta);
                        s.pos.push_back(Vec3{c[0] + o2[0], c[1] + o2[1], c[2] + o2[2]});
                        s.q.push_back(delta);
                    }
            break;
        }
    }
    fold(s);
    return s;
}

// ---------------------------------------------------------------------------
// Particle and result files
// ---------------------------------------------------------------------------

inline void write_particles(const std::string& path, const ParticleSystem& s) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << s.size() << '\n';
    f << "box " << fmt_g(s.box[0]) << ' ' << fmt_g(s.box[1]) << ' ' << fmt_g(s.box[2])
      << '\n';
    for (std::size_t i = 0; i < s.size(); ++i)
        f << fmt_g(s.q[i]) << ' ' << fmt_g(s.pos[i][0]) << ' ' << fmt_g(s.pos[i][1])
          << ' ' << fmt_g(s.pos[i][2]) << '\n';
    if (!f) throw IoError("write failed: " + path);
}

inline ParticleSystem read_particles(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open for reading: " + path);
    std::size_t n = 0;
    if (!(f >> n) || n < 1) throw IoError("malformed particle file (count): " + path);
    std::string tag;
    ParticleSystem s;
    if (!(f >> tag) || tag != "box" || !(f >> s.box[0] >> s.box[1] >> s.box[2]))
        throw IoError("malformed particle file (box line): " + path);
    s.q.resize(n);
    s.pos.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        if (!(f >> s.q[i] >> s.pos[i][0] >> s.pos[i][1] >> s.pos[i][2]))
            throw IoError("malformed particle file (row " + std::to_string(i + 1)
                          + "): " + path);
    return s;
}

inline void write_potentials(const std::string& path, const std::vector<double>& u) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    for (double v : u) f << fmt_g(v) << '\n';
    if (!f) throw IoError("write failed: " + path);
}

inline void write_forces(const std::string& path, const std::vector<Vec3>& F) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    for (const Vec3& v : F)
        f << fmt_g(v[0]) << ' ' << fmt_g(v[1]) << ' ' << fmt_g(v[2]) << '\n';
    if (!f) throw IoError("write failed: " + path);
}

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline void write_keyvalues(const std::string& path, const KeyValues& kv) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    for (const auto& [k, v] : kv) f << k << '=' << v << '\n';
    if (!f) throw IoError("write failed: " + path);
}

inline std::vector<double> read_column(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open for reading: " + path);
    std::vector<double> out;
    double v;
    while (f >> v) out.push_back(v);
    return out;
}

inline KeyValues read_keyvalues(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open for reading: " + path);
    KeyValues kv;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        auto pos = line.find('=');
        if (pos == std::string::npos) throw IoError("malformed key=value line: " + path);
        kv.emplace_back(line.substr(0, pos), line.substr(pos + 1));
    }
    return kv;
}

}  // namespace esp
