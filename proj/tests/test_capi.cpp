#include "reachprecise/reachprecise.h"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

namespace {

struct Config {
  rp_config* p = nullptr;
  Config() { EXPECT_EQ(rp_config_preset("desk", &p), RP_OK); }
  ~Config() { rp_config_free(p); }
};

const double kReference[6] = {-5, -120, -60, -90, 50, 175};

}  // namespace

TEST(CApi, StatusNamesAndVersion) {
  EXPECT_STREQ(rp_status_name(RP_OK), "ok");
  EXPECT_NE(std::string(rp_status_name(RP_ERR_AUDIT)), "ok");
  EXPECT_GT(std::strlen(rp_version()), 0u);
}

TEST(CApi, ErrorsSetLastError) {
  rp_config* cfg = nullptr;
  EXPECT_EQ(rp_config_preset("enormous", &cfg), RP_ERR_CONFIG);
  EXPECT_EQ(cfg, nullptr);
  EXPECT_NE(std::string(rp_last_error()).find("enormous"), std::string::npos);
  EXPECT_EQ(rp_config_preset(nullptr, &cfg), RP_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(rp_config_load("/nonexistent/cfg.json", &cfg), RP_ERR_IO);
  rp_config_free(nullptr);
  rp_model_free(nullptr);
  rp_report_free(nullptr);
}

TEST(CApi, ConfigEditing) {
  Config c;
  char hash[17];
  ASSERT_EQ(rp_config_hash(c.p, hash, sizeof hash), RP_OK);
  EXPECT_EQ(std::strlen(hash), 16u);
  char tiny[8];
  EXPECT_EQ(rp_config_hash(c.p, tiny, sizeof tiny), RP_ERR_INVALID_ARGUMENT);

  ASSERT_EQ(rp_config_set_seed(c.p, 5), RP_OK);
  char hash2[17];
  rp_config_hash(c.p, hash2, sizeof hash2);
  EXPECT_STRNE(hash, hash2);

  EXPECT_EQ(rp_config_apply_json(c.p, R"({"reach": {"iterations": 3}})"), RP_OK);
  EXPECT_EQ(rp_config_apply_json(c.p, R"({"bogus": 1})"), RP_ERR_CONFIG);
  EXPECT_EQ(rp_config_set_workers(c.p, 0), RP_ERR_INVALID_ARGUMENT);

  size_t needed = 0;
  ASSERT_EQ(rp_config_to_json(c.p, nullptr, 0, &needed), RP_OK);
  std::vector<char> buf(needed);
  ASSERT_EQ(rp_config_to_json(c.p, buf.data(), buf.size(), &needed), RP_OK);
  EXPECT_NE(std::string(buf.data()).find("\"iterations\": 3"), std::string::npos);
}

TEST(CApi, Kinematics) {
  Config c;
  double pos[3], rot[9];
  ASSERT_EQ(rp_forward_kinematics(c.p, kReference, pos, rot), RP_OK);
  double det = rot[0] * (rot[4] * rot[8] - rot[5] * rot[7]) -
               rot[1] * (rot[3] * rot[8] - rot[5] * rot[6]) +
               rot[2] * (rot[3] * rot[7] - rot[4] * rot[6]);
  EXPECT_NEAR(det, 1.0, 1e-12);

  double exact = 0, approx = 0;
  ASSERT_EQ(rp_min_end_displacement(c.p, kReference, 1.0, &exact, &approx), RP_OK);
  EXPECT_NEAR(approx * 1e3, 2.91, 0.005);

  double bad[6] = {0, 0, 0, 10, 0, 0};
  EXPECT_EQ(rp_forward_kinematics(c.p, bad, pos, rot), RP_ERR_DOMAIN);
  EXPECT_EQ(rp_min_end_displacement(c.p, kReference, 0.0, &exact, &approx),
            RP_ERR_INVALID_ARGUMENT);

  double d = 0;
  ASSERT_EQ(rp_max_relative_distance(c.p, 1.0, 5000, 1, &d), RP_OK);
  EXPECT_GT(d, 0.0);
}

TEST(CApi, ObserveIsInverseOfForwardKinematics) {
  Config c;
  double pos[3], rot[9];
  rp_forward_kinematics(c.p, kReference, pos, rot);
  const double rel[3] = {0.01, -0.03, 0.2};
  double target[3];
  for (int i = 0; i < 3; ++i)
    target[i] = pos[i] + rot[3 * i] * rel[0] + rot[3 * i + 1] * rel[1] + rot[3 * i + 2] * rel[2];
  double seen[3];
  ASSERT_EQ(rp_observe(c.p, target, kReference, seen), RP_OK);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(seen[i], rel[i], 1e-12);
}

TEST(CApi, ModelAndReach) {
  Config c;
  ASSERT_EQ(rp_config_apply_json(
                c.p, R"({"model": {"layer_dims": [9, 16, 6]}, "reach": {"iterations": 5}})"),
            RP_OK);
  rp_model* m = nullptr;
  ASSERT_EQ(rp_model_create(c.p, &m), RP_OK);
  const auto checksum = rp_model_checksum(m);

  const double rel[3] = {0.003, 0.001, -0.002};
  double dq[6];
  ASSERT_EQ(rp_model_infer(m, kReference, rel, dq), RP_OK);
  for (double v : dq) EXPECT_LE(std::abs(v), 10.0 + 1e-9);

  rp_report* r = nullptr;
  ASSERT_EQ(rp_reach(c.p, m, "s1", kReference, rel, 1.0, "min", 0, &r), RP_OK);
  double replay = -1;
  ASSERT_EQ(rp_report_replay(c.p, r, &replay), RP_OK);
  EXPECT_NEAR(replay, rp_report_precision(r), 1e-9);
  EXPECT_EQ(rp_report_success(r), rp_report_precision(r) < rp_report_threshold(r) ? 1 : 0);
  ASSERT_GE(rp_report_step_count(r), 1u);
  double step[6];
  ASSERT_EQ(rp_report_step(r, 0, step), RP_OK);
  for (double v : step) EXPECT_NEAR(v, std::round(v), 1e-9);
  EXPECT_EQ(rp_report_step(r, 1000, step), RP_ERR_INVALID_ARGUMENT);
  size_t needed = 0;
  EXPECT_EQ(rp_report_to_json(r, nullptr, 0, &needed), RP_OK);
  EXPECT_GT(needed, 10u);
  rp_report_free(r);

  EXPECT_EQ(rp_reach(c.p, m, "teleport", kReference, rel, 1.0, "min", 0, &r),
            RP_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(rp_reach(c.p, m, "s1", kReference, rel, 1.0, "third", 0, &r),
            RP_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(rp_model_checksum(m), checksum);
  rp_model_free(m);
}

TEST(CApi, ModelSaveLoad) {
  Config c;
  rp_model* m = nullptr;
  ASSERT_EQ(rp_model_create(c.p, &m), RP_OK);
  const std::string path = ::testing::TempDir() + "rp_capi_model.ckpt";
  ASSERT_EQ(rp_model_save(m, path.c_str()), RP_OK);
  rp_model* back = nullptr;
  ASSERT_EQ(rp_model_load(path.c_str(), &back), RP_OK);
  EXPECT_EQ(rp_model_checksum(back), rp_model_checksum(m));
  rp_model_free(back);
  rp_model_free(m);
  EXPECT_EQ(rp_model_load("/nonexistent.ckpt", &back), RP_ERR_IO);
}

TEST(CApi, UnknownTableIsInvalid) {
  Config c;
  const int tables[] = {9};
  EXPECT_EQ(rp_cmd_tables(c.p, tables, 1, 0), RP_ERR_INVALID_ARGUMENT);
}
