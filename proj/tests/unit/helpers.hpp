#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "polypgen/tensor.hpp"

namespace testutil {

inline polypgen::BinaryMask random_mask(int h, int w, std::mt19937_64& rng, double p = 0.5) {
    std::bernoulli_distribution b(p);
    polypgen::BinaryMask m(h, w);
    for (auto& v : m.data) v = b(rng) ? 1 : 0;
    return m;
}

inline polypgen::ImageTensor random_image(int c, int h, int w, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    polypgen::ImageTensor t(c, h, w);
    for (auto& v : t.data) v = u(rng);
    return t;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("polypgen_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace testutil
