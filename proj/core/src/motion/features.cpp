#include "critter/motion/features.hpp"

#include <cmath>
#include <numbers>

#include "critter/motion/kinematics.hpp"
#include "critter/motion/rotation.hpp"
#include "critter/util/binary_io.hpp"
#include "critter/util/error.hpp"

namespace critter::motion {

namespace {

struct GroundAxes {
  int up;
  int a;  // heading zero direction
  int b;  // heading +90 degrees
};

GroundAxes axes_for(UpAxis up) {
  const int u = static_cast<int>(up);
  return {u, (u + 1) % 3, (u + 2) % 3};
}

double wrap_angle(double x) {
  x = std::remainder(x, 2.0 * std::numbers::pi);
  return x;
}

Eigen::Quaterniond heading_rotation(double heading, const GroundAxes& ax) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(heading, Eigen::Vector3d::Unit(ax.up)));
}

double heading_of(const Eigen::Quaterniond& q, const GroundAxes& ax) {
  const Eigen::Vector3d f = q * Eigen::Vector3d::Unit(ax.a);
  return std::atan2(f[ax.b], f[ax.a]);
}

}  // namespace

void check_feature_layout(const Skeleton& skeleton) {
  for (int j = 0; j < skeleton.num_joints(); ++j) {
    const Joint& jt = skeleton.joint(j);
    int rot = 0;
    int pos = 0;
    for (Channel c : jt.channels) (is_rotation(c) ? rot : pos)++;
    if (rot != 0 && rot != 3) {
      throw InvalidArgument("unsupported channel layout: joint '" + jt.name + "' has " + std::to_string(rot) +
                            " rotation channels (need 0 or 3)");
    }
    if (pos != 0 && (j != 0 || pos != 3)) {
      throw InvalidArgument("unsupported channel layout: joint '" + jt.name +
                            "' has position channels (only a root with all three is supported)");
    }
  }
}

FeatureMatrix to_features(const MotionClip& clip) { return to_features(clip, FeatureSpec{clip.skeleton()}); }

FeatureMatrix to_features(const MotionClip& clip, const FeatureSpec& spec) {
  if (!(spec.skeleton == clip.skeleton())) throw InvalidArgument("feature spec skeleton does not match the clip");
  check_feature_layout(spec.skeleton);
  const GroundAxes ax = axes_for(spec.up);
  const Skeleton& sk = spec.skeleton;
  const int n = clip.num_frames();
  const int joints = sk.num_joints();

  FeatureMatrix out;
  out.spec = spec;
  out.frame_time = clip.frame_time();
  out.data = Eigen::MatrixXd::Zero(n, spec.dim());

  Eigen::Vector3d prev_root = Eigen::Vector3d::Zero();
  double prev_heading = 0.0;
  for (int t = 0; t < n; ++t) {
    const Eigen::VectorXd row = clip.frame(t);
    const std::span<const double> frame(row.data(), static_cast<std::size_t>(row.size()));
    const Pose pose = forward_kinematics_pose(sk, frame);
    const Eigen::Vector3d root = pose.positions[0];
    const double heading = heading_of(pose.rotations[0], ax);
    const Eigen::Quaterniond head = heading_rotation(heading, ax);

    if (t == 0) {
      out.anchor = {root[ax.a], root[ax.b], heading};
    } else {
      const Eigen::Vector3d local = heading_rotation(prev_heading, ax).conjugate() * (root - prev_root);
      out.data(t, 0) = local[ax.a];
      out.data(t, 1) = local[ax.b];
      out.data(t, 2) = wrap_angle(heading - prev_heading);
    }
    out.data(t, 3) = root[ax.up];

    for (int j = 0; j < joints; ++j) {
      const Eigen::Quaterniond local_rot =
          j == 0 ? Eigen::Quaterniond(head.conjugate() * pose.rotations[0]) : joint_rotation(sk, j, frame);
      out.data.block<1, 6>(t, spec.rotation_column(j)) = rotation_to_6d(local_rot).transpose();

      Eigen::Vector3d rel = pose.positions[static_cast<std::size_t>(j)];
      rel[ax.a] -= root[ax.a];
      rel[ax.b] -= root[ax.b];
      out.data.block<1, 3>(t, spec.position_column(j)) = (head.conjugate() * rel).transpose();
    }
    prev_root = root;
    prev_heading = heading;
  }
  return out;
}

MotionClip from_features(const FeatureMatrix& features) {
  const FeatureSpec& spec = features.spec;
  const Skeleton& sk = spec.skeleton;
  check_feature_layout(sk);
  if (features.data.cols() != spec.dim()) {
    throw InvalidArgument("feature matrix has " + std::to_string(features.data.cols()) + " columns, spec expects " +
                          std::to_string(spec.dim()));
  }
  if (!features.data.allFinite()) throw InvalidArgument("feature matrix contains non-finite values");
  const GroundAxes ax = axes_for(spec.up);
  const int n = features.num_frames();
  const Joint& root_joint = sk.joint(0);
  const bool root_has_rotation = rotation_axes(sk, 0).size() == 3;

  Eigen::MatrixXd frames = Eigen::MatrixXd::Zero(n, sk.num_channels());
  double heading = features.anchor.heading;
  Eigen::Vector3d root = Eigen::Vector3d::Zero();
  root[ax.a] = features.anchor.ground_a;
  root[ax.b] = features.anchor.ground_b;

  for (int t = 0; t < n; ++t) {
    if (t > 0) {
      Eigen::Vector3d local = Eigen::Vector3d::Zero();
      local[ax.a] = features.data(t, 0);
      local[ax.b] = features.data(t, 1);
      root += heading_rotation(heading, ax) * local;
      heading += features.data(t, 2);
    }
    root[ax.up] = features.data(t, 3);

    Eigen::VectorXd row = Eigen::VectorXd::Zero(sk.num_channels());
    const std::span<double> frame(row.data(), static_cast<std::size_t>(row.size()));
    for (int j = 0; j < sk.num_joints(); ++j) {
      const Eigen::Matrix<double, 6, 1> six = features.data.block<1, 6>(t, spec.rotation_column(j)).transpose();
      Eigen::Quaterniond rot = rotation_from_6d(six);
      if (j == 0) rot = heading_rotation(heading, ax) * rot;
      if (j == 0 && !root_has_rotation) continue;
      if (rotation_axes(sk, j).size() == 3) set_joint_rotation(sk, j, rot, frame);
    }
    const int base = sk.channel_offset(0);
    for (std::size_t c = 0; c < root_joint.channels.size(); ++c) {
      const Channel ch = root_joint.channels[c];
      if (is_position(ch)) {
        const int a = channel_axis(ch);
        frame[static_cast<std::size_t>(base) + c] = root[a] - root_joint.offset[a];
      }
    }
    frames.row(t) = row.transpose();
  }
  return MotionClip(sk, features.frame_time, std::move(frames));
}

std::vector<std::uint8_t> encode_feature_file(const Eigen::MatrixXd& data) {
  io::ByteWriter w;
  w.magic("MAFM");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(data.rows()));
  w.u32(static_cast<std::uint32_t>(data.cols()));
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.cols(); ++c) w.f32(static_cast<float>(data(r, c)));
  }
  return w.take();
}

Eigen::MatrixXd decode_feature_file(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  r.expect_magic("MAFM");
  const std::uint32_t version = r.u32();
  if (version != 1) throw ParseError("unsupported MAFM version " + std::to_string(version));
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  if (r.remaining() != static_cast<std::size_t>(rows) * cols * 4) throw ParseError("MAFM payload size mismatch");
  Eigen::MatrixXd data(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < cols; ++j) data(i, j) = r.f32();
  }
  if (!data.allFinite()) throw ParseError("MAFM contains non-finite values");
  return data;
}

void write_feature_file(const std::string& path, const Eigen::MatrixXd& data) {
  io::write_file_atomic(path, encode_feature_file(data));
}

Eigen::MatrixXd read_feature_file(const std::string& path) { return decode_feature_file(io::read_file_bytes(path)); }

}  // namespace critter::motion
