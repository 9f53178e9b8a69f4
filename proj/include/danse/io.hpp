#pragma once

#include "danse/prior_net.hpp"
#include "danse/ssm.hpp"

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace danse::io {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bundle on disk: JSON manifest at `path`, raw little-endian f64
/// payload in the sibling file named by the manifest. The measurement
/// matrix H travels with the bundle so downstream commands can rebuild
/// the measurement model.
void write_bundle(const std::string& path, const ssm::TrajectoryBundle& b,
                  const Eigen::MatrixXd& H);
struct LoadedBundle {
  ssm::TrajectoryBundle bundle;
  Eigen::MatrixXd H;
};
LoadedBundle read_bundle(const std::string& path);

/// Checkpoint: JSON manifest listing tensor names, shapes and byte
/// offsets, plus a raw f64 payload file. Tensors are matched by name on
/// load, so manifest order does not matter.
void write_checkpoint(const std::string& path,
                      const prior_net::PriorNetParams& params);
prior_net::PriorNetParams read_checkpoint(const std::string& path);

}  // namespace danse::io
