// SPDX-License-Identifier: Apache-2.0
#include "herl/config.hpp"
#include "support.hpp"

#include <doctest.h>

#include <fstream>

using namespace herl;
using namespace herl::config;

TEST_CASE("defaults are valid") {
  RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.momentum == 0.98);
  CHECK(cfg.hyp.c == 0.1);
  CHECK(cfg.loss.alpha_final == 0.2);
}

TEST_CASE("text parsing") {
  RunConfig cfg;
  apply_text(cfg,
             "# comment\n"
             "epochs = 12   # trailing\n"
             "lr=0.5\n"
             "hidden = \"8,4\"\n"
             "use_pro = false\n"
             "dataset = \"dir # with hash\"\n"
             "\n"
             "noise = +1.5\n");
  CHECK(cfg.epochs == 12);
  CHECK(cfg.lr == 0.5);
  CHECK(cfg.hidden == std::vector<Index>{8, 4});
  CHECK(!cfg.loss.use_pro);
  CHECK(cfg.dataset == "dir # with hash");
  CHECK(cfg.synth.noise == 1.5);
}

TEST_CASE("parse errors name the line") {
  RunConfig cfg;
  CHECK_THROWS_AS(apply_text(cfg, "bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(apply_text(cfg, "epochs = ten\n"), ConfigError);
  CHECK_THROWS_AS(apply_text(cfg, "use_ang = maybe\n"), ConfigError);
  CHECK_THROWS_AS(apply_text(cfg, "epochs\n"), ConfigError);
  try {
    apply_text(cfg, "\nepochs = 1.5\n", "f.cfg");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("f.cfg:2") == 0);
  }
}

TEST_CASE("render round trip") {
  RunConfig cfg;
  set_value(cfg, "hidden", "[16, 8]");
  set_value(cfg, "lr", "0.1");
  set_value(cfg, "out", "some/dir");
  set_value(cfg, "use_dis", "0");
  RunConfig back;
  apply_text(back, render(cfg));
  CHECK(render(back) == render(cfg));
  CHECK(back.hidden == cfg.hidden);
  CHECK(back.lr == 0.1);
  CHECK(!back.loss.use_dis);
  CHECK(entries(cfg).size() == 39);
}

TEST_CASE("load applies file then overrides and validates") {
  const auto dir = test::scratch_dir("config");
  std::ofstream(dir / "run.cfg") << "epochs = 3\nseed = 9\n";
  const RunConfig cfg = load(dir / "run.cfg", {"seed=4", "eta = 0.25"});
  CHECK(cfg.epochs == 3);
  CHECK(cfg.seed == 4);
  CHECK(cfg.mask.eta == 0.25);
  CHECK_THROWS_AS(load(dir / "missing.cfg"), IoError);
  CHECK_THROWS_AS(load({}, {"momentum=1"}), ConfigError);
  CHECK_THROWS_AS(load({}, {"batch_size=1"}), ConfigError);
  CHECK_THROWS_AS(load({}, {"noequals"}), ConfigError);
  CHECK_THROWS_AS(load({}, {"xi=2"}), ConfigError);
}
