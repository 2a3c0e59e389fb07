#pragma once

#include <cstdint>
#include <string>

namespace resonance {

// Minimal SHA-256 (FIPS 180-4), used to bind sealed keys to emitted
// dataset files and to record input digests in run manifests.
class Sha256 {
  public:
    Sha256();
    void update(const void* data, std::size_t len);
    // Lowercase hex digest; finalizes a copy, so the object stays usable.
    std::string hex() const;

    static std::string of_string(const std::string& s);
    static std::string of_file(const std::string& path);  // throws data_error on I/O failure

  private:
    void process_block(const std::uint8_t* block);

    std::uint32_t h_[8];
    std::uint8_t buf_[64];
    std::size_t buf_len_ = 0;
    std::uint64_t total_len_ = 0;
};

}  // namespace resonance
