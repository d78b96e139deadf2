#include <gtest/gtest.h>

#include <filesystem>
#include <numbers>

#include "critter/motion/bvh.hpp"
#include "critter/motion/clip_ops.hpp"
#include "critter/motion/features.hpp"
#include "critter/motion/kinematics.hpp"
#include "critter/motion/rotation.hpp"
#include "critter/util/error.hpp"
#include "random_motion.hpp"

using namespace critter;
using namespace critter::motion;

namespace {

constexpr const char* kMinimal = R"(HIERARCHY
ROOT Hips
{
  OFFSET 0 0 0
  CHANNELS 3 Zrotation Xrotation Yrotation
}
MOTION
Frames: 1
Frame Time: 0.0333333
0 0 0
)";

Skeleton two_joint_chain() {
  Joint root{"root", -1, Eigen::Vector3d::Zero(),
             {Channel::kXposition, Channel::kYposition, Channel::kZposition, Channel::kZrotation, Channel::kXrotation,
              Channel::kYrotation},
             std::nullopt};
  Joint child{"child", 0, Eigen::Vector3d(1, 0, 0), {Channel::kZrotation, Channel::kXrotation, Channel::kYrotation},
              Eigen::Vector3d(1, 0, 0)};
  return Skeleton({root, child});
}

void expect_clips_near(const MotionClip& a, const MotionClip& b, double tol) {
  ASSERT_TRUE(a.skeleton() == b.skeleton());
  ASSERT_EQ(a.num_frames(), b.num_frames());
  EXPECT_NEAR(a.frame_time(), b.frame_time(), tol);
  EXPECT_LE((a.frames() - b.frames()).cwiseAbs().maxCoeff(), tol);
}

std::string samples_dir() { return CRITTER_SAMPLES_DIR; }

}  // namespace

TEST(Bvh, ParsesMinimalDocument) {
  const MotionClip clip = parse_bvh(kMinimal);
  EXPECT_EQ(clip.skeleton().num_joints(), 1);
  EXPECT_EQ(clip.num_frames(), 1);
  EXPECT_EQ(clip.frames().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR(clip.frame_time(), 0.0333333, 1e-12);
}

TEST(Bvh, ToleratesTrailingWhitespace) {
  const MotionClip clip = parse_bvh(std::string(kMinimal) + "\n\n   \t\n");
  EXPECT_EQ(clip.num_frames(), 1);
}

TEST(Bvh, FrameCountMismatchIsAnError) {
  std::string doc = "HIERARCHY\nROOT a\n{\nOFFSET 0 0 0\nCHANNELS 1 Xrotation\n}\nMOTION\nFrames: 10\nFrame Time: 0.1\n";
  for (int i = 0; i < 9; ++i) doc += "1.0\n";
  try {
    parse_bvh(doc);
    FAIL() << "expected a frame-count error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("10 frames"), std::string::npos) << e.what();
  }
}

TEST(Bvh, ChannelCountMismatchReportsLineAndColumn) {
  const std::string doc =
      "HIERARCHY\nROOT a\n{\nOFFSET 0 0 0\nCHANNELS 2 Xrotation Yrotation\n}\nMOTION\nFrames: 2\nFrame Time: 0.1\n1 2\n3\n";
  try {
    parse_bvh(doc);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 11);
  }
}

TEST(Bvh, NonNumericValueIsAnError) {
  const std::string doc = "HIERARCHY\nROOT a\n{\nOFFSET 0 0 0\nCHANNELS 1 Xrotation\n}\nMOTION\nFrames: 1\nFrame Time: 0.1\nabc\n";
  try {
    parse_bvh(doc);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 10);
    EXPECT_EQ(e.column(), 1);
  }
}

TEST(Bvh, SyntaxErrorsCarryPosition) {
  EXPECT_THROW(parse_bvh("HIERARCHY\nROOT a\n{\nOFSET 0 0 0\n}\n"), ParseError);
  EXPECT_THROW(parse_bvh("MOTION\n"), ParseError);
  EXPECT_THROW(parse_bvh("HIERARCHY\nROOT a\n{\nOFFSET 0 0 0\nCHANNELS 1 Wrotation\n}\n"), ParseError);
  try {
    parse_bvh("HIERARCHY\nROOT a\n{\n  OFFSET 0 0 0\n  CHANNELS 1 Xrotation\n  bogus\n}\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 6);
    EXPECT_EQ(e.column(), 3);
  }
}

TEST(Bvh, WriterEchoesHeaders) {
  const MotionClip zero = parse_bvh(kMinimal);
  const std::string text = write_bvh(zero);
  EXPECT_NE(text.find("Frames: 1\n"), std::string::npos);

  const MotionClip clip(zero.skeleton(), 1.0 / 30.0, Eigen::MatrixXd::Zero(1, 3));
  EXPECT_NE(write_bvh(clip).find("Frame Time: 0.0333333\n"), std::string::npos);
}

TEST(Bvh, WriterRejectsForeignSkeleton) {
  const MotionClip clip = parse_bvh(kMinimal);
  EXPECT_THROW(write_bvh(two_joint_chain(), clip), InvalidArgument);
}

TEST(Bvh, SampleCorpusRoundTrips) {
  int files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(samples_dir())) {
    if (entry.path().extension() != ".bvh") continue;
    ++files;
    const MotionClip first = load_bvh(entry.path().string());
    const MotionClip second = parse_bvh(write_bvh(first));
    expect_clips_near(first, second, 1e-5);
    // A second pass is a byte-level fixpoint.
    EXPECT_EQ(write_bvh(second), write_bvh(first));
  }
  EXPECT_GE(files, 4);
}

TEST(Bvh, RandomClipsRoundTrip) {
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const MotionClip clip = fixtures::random_clip(rng);
    const MotionClip parsed = parse_bvh(write_bvh(clip));
    ASSERT_EQ(parsed.skeleton().num_joints(), clip.skeleton().num_joints());
    EXPECT_LE((parsed.frames() - clip.frames()).cwiseAbs().maxCoeff(), 1e-5);
    expect_clips_near(parsed, parse_bvh(write_bvh(parsed)), 1e-5);
  }
}

TEST(Kinematics, ZeroFrameSumsOffsets) {
  const Skeleton sk = two_joint_chain();
  const auto pos = forward_kinematics(sk, std::vector<double>(9, 0.0));
  EXPECT_TRUE(pos[0].isZero());
  EXPECT_TRUE(pos[1].isApprox(Eigen::Vector3d(1, 0, 0)));
}

TEST(Kinematics, RootZRotationTurnsChild) {
  const Skeleton sk = two_joint_chain();
  std::vector<double> frame(9, 0.0);
  frame[3] = 90.0;  // root Zrotation
  const auto pos = forward_kinematics(sk, frame);
  EXPECT_NEAR(pos[1].x(), 0.0, 1e-6);
  EXPECT_NEAR(pos[1].y(), 1.0, 1e-6);
  EXPECT_NEAR(pos[1].z(), 0.0, 1e-6);
}

TEST(Kinematics, MatchesMatrixOracle) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const MotionClip clip = fixtures::random_clip(rng, {}, 2);
    for (int f = 0; f < clip.num_frames(); ++f) {
      const Eigen::VectorXd row = clip.frame(f);
      const auto fast = forward_kinematics(clip.skeleton(), std::span(row.data(), static_cast<std::size_t>(row.size())));
      const auto slow = fixtures::matrix_fk(clip.skeleton(), row);
      for (std::size_t j = 0; j < fast.size(); ++j) EXPECT_LE((fast[j] - slow[j]).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(Kinematics, ScalesLinearlyWithOffsets) {
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    fixtures::RandomSkeletonOptions opt;
    const Skeleton sk = fixtures::random_skeleton(rng, opt);
    // Translation channels must scale too, so keep them zero.
    Eigen::MatrixXd frames = fixtures::random_frames(rng, sk, 1, 180.0, 0.0);
    const double s = rng.uniform(0.1, 5.0);
    const Eigen::VectorXd row = frames.row(0).transpose();
    const std::span<const double> frame(row.data(), static_cast<std::size_t>(row.size()));
    const auto base = forward_kinematics(sk, frame);
    const auto scaled = forward_kinematics(sk.scaled(s), frame);
    for (std::size_t j = 0; j < base.size(); ++j) EXPECT_LE((scaled[j] - s * base[j]).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Kinematics, RejectsWrongFrameLength) {
  EXPECT_THROW(forward_kinematics(two_joint_chain(), std::vector<double>(4, 0.0)), InvalidArgument);
}

TEST(Rotation, EulerRoundTripsForAllOrders) {
  Rng rng(3);
  const std::vector<EulerOrder> orders = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (const auto& order : orders) {
    for (int i = 0; i < 200; ++i) {
      const Eigen::Vector3d angles(rng.uniform(-180, 180), rng.uniform(-89, 89), rng.uniform(-180, 180));
      const Eigen::Quaterniond q = quaternion_from_euler(angles, order);
      const Eigen::Vector3d back = euler_from_quaternion(q, order);
      EXPECT_TRUE(quaternion_from_euler(back, order).isApprox(q, 1e-9) ||
                  quaternion_from_euler(back, order).coeffs().isApprox(-q.coeffs(), 1e-9));
      EXPECT_LE((back - angles).cwiseAbs().maxCoeff(), 1e-7);
    }
    // Gimbal lock still reproduces the rotation.
    const Eigen::Quaterniond locked = quaternion_from_euler({30.0, 90.0, 20.0}, order);
    const Eigen::Quaterniond again = quaternion_from_euler(euler_from_quaternion(locked, order), order);
    EXPECT_NEAR(std::abs(locked.dot(again)), 1.0, 1e-9);
  }
}

TEST(Rotation, SixDRoundTrip) {
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Quaterniond q = Eigen::Quaterniond::UnitRandom();
    EXPECT_NEAR(std::abs(rotation_from_6d(rotation_to_6d(q)).dot(q)), 1.0, 1e-12);
  }
}

TEST(Features, ShapeAndStaticVelocity) {
  const Skeleton sk = two_joint_chain();
  Eigen::MatrixXd frames(5, 9);
  for (int f = 0; f < 5; ++f) frames.row(f) << 1, 2, 3, 10, 20, 30, 5, 6, 7;
  const FeatureMatrix fm = to_features(MotionClip(sk, 0.1, frames));
  EXPECT_EQ(fm.data.rows(), 5);
  EXPECT_EQ(fm.data.cols(), 4 + 9 * 2);
  EXPECT_EQ(fm.data.leftCols(3).cwiseAbs().maxCoeff(), 0.0);

  const FeatureMatrix one = to_features(MotionClip(sk, 0.1, frames.topRows(1)));
  EXPECT_EQ(one.data.rows(), 1);
  EXPECT_EQ(one.data.cols(), fm.spec.dim());
}

TEST(Features, RoundTripReproducesWorldPositions) {
  Rng rng(21);
  for (int i = 0; i < 30; ++i) {
    fixtures::RandomSkeletonOptions opt;
    opt.zero_channel_probability = 0.2;
    const Skeleton sk = fixtures::random_skeleton(rng, opt);
    const MotionClip clip = fixtures::smooth_clip(rng, sk, 40);
    const MotionClip back = from_features(to_features(clip));
    EXPECT_EQ(back.num_frames(), clip.num_frames());
    EXPECT_LE((world_positions(back) - world_positions(clip)).cwiseAbs().maxCoeff(), 1e-3);
  }
}

TEST(Features, ZeroMatrixIsRestPoseAtOrigin) {
  const Skeleton sk = two_joint_chain();
  FeatureMatrix fm;
  fm.spec = FeatureSpec{sk};
  fm.data = Eigen::MatrixXd::Zero(3, fm.spec.dim());
  const MotionClip clip = from_features(fm);
  const Eigen::MatrixXd pos = world_positions(clip);
  for (int f = 0; f < 3; ++f) {
    EXPECT_NEAR(pos.row(f).head<3>().norm(), 0.0, 1e-12);
  }
}

TEST(Features, RejectsUnsupportedLayouts) {
  Joint root{"root", -1, Eigen::Vector3d::Zero(), {Channel::kXrotation, Channel::kYrotation}, std::nullopt};
  const Skeleton sk({root});
  EXPECT_THROW(to_features(MotionClip(sk, 0.1, Eigen::MatrixXd::Zero(1, 2))), InvalidArgument);
  Joint a{"a", -1, Eigen::Vector3d::Zero(), {}, std::nullopt};
  Joint b{"b", 0, Eigen::Vector3d::UnitX(), {Channel::kXposition, Channel::kYposition, Channel::kZposition}, std::nullopt};
  EXPECT_THROW(check_feature_layout(Skeleton({a, b})), InvalidArgument);
}

TEST(Features, ZUpRoundTrip) {
  Rng rng(77);
  const Skeleton sk = fixtures::random_skeleton(rng);
  const MotionClip clip = fixtures::smooth_clip(rng, sk, 20);
  FeatureSpec spec{sk, UpAxis::kZ};
  const MotionClip back = from_features(to_features(clip, spec));
  EXPECT_LE((world_positions(back) - world_positions(clip)).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(FeatureFile, EncodesHeaderAndRoundTrips) {
  Eigen::MatrixXd data(2, 3);
  data << 1, 2, 3, 4.5, -6, 7e-3;
  const auto bytes = encode_feature_file(data);
  ASSERT_EQ(bytes.size(), 16u + 6 * 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "MAFM");
  EXPECT_EQ(bytes[4], 1);   // version, little-endian
  EXPECT_EQ(bytes[8], 2);   // N
  EXPECT_EQ(bytes[12], 3);  // D
  const Eigen::MatrixXd back = decode_feature_file(bytes);
  EXPECT_LE((back - data).cwiseAbs().maxCoeff(), 1e-6);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_feature_file(truncated), ParseError);
}

TEST(ClipOps, IdentityCases) {
  Rng rng(8);
  const MotionClip clip = fixtures::random_clip(rng, {}, 10);
  EXPECT_TRUE(resample(clip, clip.frame_time()) == clip);
  EXPECT_TRUE(crop(clip, 0, clip.num_frames()) == clip);
  EXPECT_THROW(crop(clip, 2, 2), InvalidArgument);
  EXPECT_THROW(crop(clip, -1, 1), InvalidArgument);
  EXPECT_THROW(crop(clip, 0, clip.num_frames() + 1), InvalidArgument);
}

TEST(ClipOps, CropComposes) {
  Rng rng(10);
  for (int i = 0; i < 50; ++i) {
    const Skeleton sk = fixtures::random_skeleton(rng);
    const MotionClip clip(sk, 0.05, fixtures::random_frames(rng, sk, 20));
    const int a = static_cast<int>(rng.below(10));
    const int b = a + 5 + static_cast<int>(rng.below(5));
    const int x = static_cast<int>(rng.below(3));
    const int y = x + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(b - a - x - 1) + 1));
    EXPECT_TRUE(crop(crop(clip, a, b), x, y) == crop(clip, a + x, a + y));
  }
}

TEST(ClipOps, HalfThenDoubleRateKeepsCommonFrames) {
  Rng rng(12);
  for (int i = 0; i < 10; ++i) {
    const Skeleton sk = fixtures::random_skeleton(rng);
    const MotionClip clip = fixtures::smooth_clip(rng, sk, 21);
    const MotionClip half = resample(clip, clip.frame_time() * 2.0);
    EXPECT_EQ(half.num_frames(), 11);
    const MotionClip back = resample(half, clip.frame_time());
    EXPECT_EQ(back.num_frames(), 21);
    const Eigen::MatrixXd p0 = world_positions(clip);
    const Eigen::MatrixXd p1 = world_positions(back);
    for (int f = 0; f < 21; f += 2) EXPECT_LE((p0.row(f) - p1.row(f)).cwiseAbs().maxCoeff(), 1e-2);
  }
}

TEST(ClipOps, ResampleInterpolatesMidpoints) {
  const Skeleton sk = two_joint_chain();
  Eigen::MatrixXd frames(2, 9);
  frames.row(0) << 0, 0, 0, 0, 0, 0, 0, 0, 0;
  frames.row(1) << 2, 4, 6, 40, 0, 0, 0, 0, 0;
  const MotionClip fine = resample(MotionClip(sk, 0.1, frames), 0.05);
  ASSERT_EQ(fine.num_frames(), 3);
  EXPECT_NEAR(fine.frames()(1, 0), 1.0, 1e-12);
  EXPECT_NEAR(fine.frames()(1, 3), 20.0, 1e-9);
}
