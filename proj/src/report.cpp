#include "lesionkit/report.hpp"
#include "lesionkit/csv.hpp"
#include "lesionkit/error.hpp"

#include <openssl/evp.h>

#include <memory>

namespace lesionkit {

std::string
sha256_hex(std::string_view bytes)
{
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || !EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) ||
      !EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) ||
      !EVP_DigestFinal_ex(ctx.get(), digest, &len))
    throw Error("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

std::string
sha256_file(const std::filesystem::path& path)
{
  return sha256_hex(csv::read_text(path));
}

nlohmann::json
provenance(std::uint64_t seed, const std::vector<std::filesystem::path>& inputs)
{
  nlohmann::json digests = nlohmann::json::object();
  for (const auto& p : inputs)
    digests[p.filename().string()] = sha256_file(p);
  return { { "tool", "lesionkit" },
           { "version", kToolVersion },
           { "seed", seed },
           { "inputs", digests } };
}

std::string
dump_json(const nlohmann::json& j)
{
  return j.dump(2) + "\n";
}

} // namespace lesionkit
