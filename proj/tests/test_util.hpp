// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <random>
#include <string>

namespace splatctl::testing {

/// FNV-1a of assets/demo_head.gsrf, recorded when the asset was generated by make_demo_asset.
inline constexpr const char *kDemoHeadChecksum = "753ecadbe68745c2";

inline std::filesystem::path asset_path(const std::string &name) {
    return std::filesystem::path(SPLATCTL_ASSET_DIR) / name;
}

inline std::filesystem::path data_path(const std::string &name) {
    return std::filesystem::path(SPLATCTL_TEST_DATA_DIR) / name;
}

/// Unique scratch directory removed on destruction.
class TempDir {
  public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("splatctl-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    const std::filesystem::path &path() const { return path_; }
    std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

} // namespace splatctl::testing
