#pragma once

// Permission checks against behavior-category databases. A trusted key
// ceremony publishes vk_i = g^{∂_i} per category; the user secret-shares a
// point function at its category together with π = −∂_k, and each verifier
// folds its shares into τ_j. The product of all τ_j is the identity exactly
// when the point index and the access key match.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iob/crypto/group.hpp"
#include "iob/crypto/shamir.hpp"

namespace iob::fss {

using crypto::Group;
using crypto::GroupElement;
using crypto::Scalar;

/// P_i(x) = m if x == i else 0, for x in [1, N].
struct PointFunction {
  std::uint32_t N = 0;
  std::uint32_t i = 0;
  Scalar m;
  Scalar at(std::uint32_t x) const { return x == i ? m : Scalar{}; }
};

struct DpfKey {
  std::uint32_t server = 0;  // 1-based; the Shamir evaluation point in threshold mode
  std::vector<Scalar> share;
};

/// Additive full-domain sharing over s servers. s = 1 requires `test_mode`.
/// Throws std::invalid_argument on bad N, i or s.
std::vector<DpfKey> dpf_gen(const Group& g, const PointFunction& p, std::uint32_t s, Rng& rng,
                            bool test_mode = false);

/// Same construction with the first s−1 vectors supplied by the caller.
std::vector<DpfKey> dpf_gen_masked(const Group& g, const PointFunction& p,
                                   std::span<const std::vector<Scalar>> masks);

/// Each coordinate shared with a degree-(t−1) polynomial over s servers.
std::vector<DpfKey> dpf_gen_threshold(const Group& g, const PointFunction& p, std::uint32_t s,
                                      std::uint32_t t, Rng& rng);

/// Share at x in [1, N]; throws std::out_of_range otherwise.
Scalar dpf_eval(const DpfKey& key, std::uint32_t x);

struct AccessControlList {
  std::vector<GroupElement> vk;
  std::vector<std::string> labels;
  std::size_t size() const { return vk.size(); }
};

struct AccessKey {
  std::uint32_t category = 0;  // 1-based
  Scalar secret;               // ∂_k
};

/// Trusted-party key ceremony. Holds every ∂_i; hands out one AccessKey per
/// entitled user.
class KeyCeremony {
 public:
  /// Samples N distinct ∂_i from [1, n−1]. Labels default to "category-i".
  KeyCeremony(const Group& g, std::uint32_t N, Rng& rng, std::vector<std::string> labels = {});
  /// Fixed secrets, for worked examples.
  KeyCeremony(const Group& g, std::vector<Scalar> secrets, std::vector<std::string> labels = {});

  const AccessControlList& acl() const { return acl_; }
  AccessKey issue(std::uint32_t k) const;
  std::uint32_t size() const { return static_cast<std::uint32_t>(secrets_.size()); }

 private:
  void publish(const Group& g, std::vector<std::string> labels);
  std::vector<Scalar> secrets_;
  AccessControlList acl_;
};

/// keygen(N, k): the ceremony for N categories and the key for category k.
std::pair<AccessKey, AccessControlList> keygen(const Group& g, std::uint32_t N, std::uint32_t k, Rng& rng);

/// Default labels for the first categories, then "category-i".
std::vector<std::string> default_labels(std::uint32_t N);

/// π = −∂_k.
Scalar make_proof(const Group& g, const AccessKey& key);

/// τ_j = Π_i vk_i^{[p_i]_j} · g^{[π]_j}. Throws std::invalid_argument when
/// the key length differs from |Υ|.
GroupElement local_verify(const Group& g, const AccessControlList& acl, const DpfKey& key,
                          const Scalar& proof_share);

enum class AccessVerdict { accept, reject, indeterminate };
const char* to_string(AccessVerdict v);

/// Additive mode: accept iff every τ_j is present and their product is the
/// identity; any missing τ_j gives indeterminate.
AccessVerdict check_access(const Group& g, std::span<const std::optional<GroupElement>> taus);
AccessVerdict check_access(const Group& g, std::span<const GroupElement> taus);

/// Threshold mode: Lagrange-weighted product over the first t (server, τ)
/// pairs; fewer than t pairs gives indeterminate.
AccessVerdict check_access_threshold(const Group& g, std::span<const std::pair<std::uint32_t, GroupElement>> taus,
                                     std::uint32_t t);

/// category_index,label,vk_hex
void write_acl_csv(std::ostream& os, const AccessControlList& acl);
/// Throws DecodeError on malformed rows or non-member elements.
AccessControlList read_acl_csv(const Group& g, std::istream& is);

namespace wire {

inline constexpr std::uint8_t kVersion = 1;

enum class MsgType : std::uint8_t {
  access_request = 0x10,
  access_result = 0x11,
  tau_share = 0x12,
};

struct AccessRequest {
  std::uint64_t request_id = 0;
  std::uint32_t server = 0;
  std::vector<Scalar> key;
  Scalar proof_share;
};

struct AccessResult {
  std::uint64_t request_id = 0;
  bool accept = false;
};

struct TauShare {
  std::uint64_t request_id = 0;
  std::uint32_t server = 0;
  GroupElement tau;
};

Bytes encode(const AccessRequest& m);
Bytes encode(const AccessResult& m);
Bytes encode(const TauShare& m);

/// Encoded size of an AccessRequest for N categories under `g`.
std::size_t access_request_size(const Group& g, std::uint32_t N);

AccessRequest decode_request(const Group& g, std::span<const std::uint8_t> frame);
AccessResult decode_result(std::span<const std::uint8_t> frame);
TauShare decode_tau(const Group& g, std::span<const std::uint8_t> frame);

}  // namespace wire

}  // namespace iob::fss
