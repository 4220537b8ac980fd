#include "cgbench/hash.hpp"

#include <array>
#include <cstdio>

#include <openssl/evp.h>

#include "cgbench/error.hpp"

namespace cgbench {

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw BenchError(ErrorCode::Io, "sha256 digest failed");
  }
  std::string out;
  out.reserve(len * 2);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
    out += buf;
  }
  return out;
}

}  // namespace cgbench
