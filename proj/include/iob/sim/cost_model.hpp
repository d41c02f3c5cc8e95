#pragma once

// Simulated compute time for crypto operations. Experiments read fixed
// per-operation costs from config so results are reproducible; `measure`
// times the real backend and is what `iob calibrate` prints.

#include <cstdint>
#include <map>
#include <string>

#include "iob/crypto/group.hpp"
#include "iob/util/time.hpp"

namespace iob::sim {

struct CostModel {
  SimTime base_mul = 19'000;    // g x k
  SimTime scalar_mul = 54'000;  // P x k
  SimTime combine = 16'000;     // P + Q, including decode/encode
  SimTime scalar_op = 120;      // add/sub/mul mod n
  SimTime scalar_inv = 32'000;
  SimTime small_mul = 1;        // word-sized factor in a Lagrange product
  SimTime hash = 500;           // one SHA-256 over a short transcript
  SimTime sign = 1'300;         // message MAC
  SimTime verify = 1'300;

  SimTime prove() const { return base_mul + hash + 2 * scalar_op; }
  /// Shamir-sharing c and r into q slices of degree t-1.
  SimTime share(std::uint64_t q, std::uint64_t t) const;
  SimTime lagrange(std::uint64_t t) const;
  /// Reconstruct c and r from t slices and check the proof.
  SimTime ca_verify(std::uint64_t t) const;
  SimTime keygen(std::uint64_t N) const { return static_cast<SimTime>(N) * base_mul; }
  SimTime dpf_gen(std::uint64_t N, std::uint64_t s) const;
  SimTime local_verify(std::uint64_t N) const;
  SimTime check_access(std::uint64_t s) const { return static_cast<SimTime>(s) * combine; }

  std::map<std::string, std::int64_t> to_map() const;
  /// Overrides fields named cost.<field> (nanoseconds); unknown keys ignored.
  void apply(const std::map<std::string, std::string>& kv);
};

/// Wall-clock timing of the backend's primitives, median of `rounds` batches.
CostModel measure(const crypto::Group& g, int rounds = 7);

}  // namespace iob::sim
