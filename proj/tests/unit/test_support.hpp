#pragma once

// Instance builders for tests. They draw from std::mt19937_64 rather than the
// library's streams so that oracles share no code with the implementation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <unistd.h>
#include <string>
#include <vector>

#include "mars/bt_core.hpp"

namespace testing {

inline std::vector<double> random_vector(std::mt19937_64& gen, std::size_t d, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    std::vector<double> v(d);
    for (double& x : v) x = nd(gen);
    return v;
}

inline mars::Dataset random_dataset(std::mt19937_64& gen, std::size_t n, std::size_t d, double scale = 1.0) {
    mars::Dataset data;
    for (std::size_t i = 0; i < n; ++i)
        data.push_back(mars::PreferenceTuple::make("t" + std::to_string(i), random_vector(gen, d, scale),
                                                   random_vector(gen, d, scale)));
    return data;
}

// Tuple whose psi equals `psi` exactly (rejected side is zero).
inline mars::PreferenceTuple tuple_with_psi(const std::string& id, std::vector<double> psi) {
    std::vector<double> zero(psi.size(), 0.0);
    return mars::PreferenceTuple::make(id, std::move(psi), std::move(zero));
}

inline double rel_error(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("mars_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace testing
