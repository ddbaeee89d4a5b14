// Copyright 2026 The ftrack Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <map>

#include "doctest.h"
#include "ftrack/eval.hpp"
#include "oracles.hpp"

using namespace ftrack;

namespace {

FormantTrack label_track(const std::vector<std::string>& phones,
                         const std::vector<std::array<double, 3>>& hz) {
  FormantTrack t;
  for (std::size_t i = 0; i < phones.size(); ++i) {
    FormantFrame f;
    f.time_s = (double(i) + 0.5) * 0.01;
    f.hz = hz[i];
    f.phone = phones[i];
    f.is_speech = phones[i] != "sil";
    t.frames.push_back(f);
  }
  return t;
}

std::vector<bool> all_true(std::size_t n) { return std::vector<bool>(n, true); }

std::vector<PhoneClass> classes_of(const std::vector<std::pair<PhoneClass, int>>& runs) {
  std::vector<PhoneClass> out;
  for (const auto& [c, n] : runs) out.insert(out.end(), n, c);
  return out;
}

std::vector<int> selected(const std::vector<bool>& s) {
  std::vector<int> out;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i]) out.push_back(int(i));
  return out;
}

}  // namespace

TEST_CASE("30 ms label alignment") {
  const FormantTrack c = label_track({"V", "V", "V"}, {{{500, 1500, 2500}},
                                                       {{500, 1500, 2500}},
                                                       {{500, 1500, 2500}}});
  const FormantTrack same = align_labels_30ms(c);
  for (const auto& f : same.frames) CHECK(f.hz == c.frames[0].hz);

  const FormantTrack r = label_track({"a", "b", "c"}, {{{400, 1400, 2400}},
                                                       {{500, 1500, 2500}},
                                                       {{600, 1600, 2600}}});
  const FormantTrack a = align_labels_30ms(r);
  CHECK(a.frames[1].hz[0] == doctest::Approx(500.0));
  CHECK(a.frames[0].hz[0] == doctest::Approx((400.0 + 400.0 + 500.0) / 3.0));
  CHECK(a.frames[2].hz[0] == doctest::Approx((500.0 + 600.0 + 600.0) / 3.0));
  CHECK(a.frames[1].phone == "b");

  FormantTrack gap = r;
  gap.frames[0].hz[2] = 0.0;
  const FormantTrack g = align_labels_30ms(gap);
  CHECK(g.frames[1].hz[2] == doctest::Approx((2500.0 + 2600.0) / 2.0));
}

TEST_CASE("mae and mape") {
  const std::vector<double> ref{500, 1000, 2000, 0, 800};
  CHECK(*mae(ref, ref, all_true(5)) == 0.0);
  std::vector<double> plus = ref;
  for (auto& x : plus) x += 50;
  CHECK(*mae(plus, ref, all_true(5)) == doctest::Approx(50.0));
  const std::vector<double> one_ref{500}, one_pred{550};
  CHECK(*mape(one_pred, one_ref, all_true(1)) == doctest::Approx(10.0));
  CHECK(*mape(ref, ref, all_true(5)) == 0.0);
  CHECK_FALSE(mae(ref, ref, std::vector<bool>(5, false)).has_value());
  CHECK_FALSE(mape(ref, ref, {false, false, false, true, false}).has_value());

  auto g = oracle::rng(41);
  std::vector<double> p(200), q(200);
  std::vector<bool> sel(200);
  for (int i = 0; i < 200; ++i) {
    q[i] = i % 17 == 0 ? 0.0 : oracle::uniform(g, 200, 3000);
    p[i] = oracle::uniform(g, 200, 3000);
    sel[i] = oracle::uniform(g) > -0.5;
  }
  double s = 0, sp = 0;
  int n = 0;
  for (int i = 0; i < 200; ++i)
    if (sel[i] && q[i] > 0) {
      s += std::abs(p[i] - q[i]);
      sp += 100.0 * std::abs(p[i] - q[i]) / q[i];
      ++n;
    }
  CHECK(std::abs(*mae(p, q, sel) - s / n) < 1e-9);
  CHECK(std::abs(*mape(p, q, sel) - sp / n) < 1e-9);
}

TEST_CASE("phone classes") {
  const PhoneClassMap m = PhoneClassMap::timit_default();
  CHECK(m.find("iy") == PhoneClass::vowel);
  CHECK(m.find("s") == PhoneClass::fricative);
  CHECK(m.find("jh") == PhoneClass::affricate);
  CHECK(m.find("V") == PhoneClass::vowel);
  CHECK_FALSE(m.find("zz").has_value());

  FormantTrack t = label_track({"sil", "iy", "s", "jh", "n", "w", "p", "iy"},
                               std::vector<std::array<double, 3>>(8, {500, 1500, 2500}));
  t.frames[7].is_speech = false;
  const auto c = classify_frames(t, m);
  CHECK(c[0] == PhoneClass::other);
  CHECK(c[1] == PhoneClass::vowel);
  CHECK(c[2] == PhoneClass::fricative);
  CHECK(c[3] == PhoneClass::affricate);
  CHECK(c[4] == PhoneClass::nasal);
  CHECK(c[5] == PhoneClass::semivowel);
  CHECK(c[6] == PhoneClass::stop);
  CHECK(c[7] == PhoneClass::other);

  t.frames[2].phone = "qq";
  t.frames[3].phone = "zz";
  try {
    classify_frames(t, m);
    FAIL("expected an error");
  } catch (const Error& e) {
    const std::string what = e.what();
    CHECK(what.find("qq") != std::string::npos);
    CHECK(what.find("zz") != std::string::npos);
  }

  const PhoneClassMap parsed = PhoneClassMap::parse(m.to_text());
  CHECK(parsed.to_text() == m.to_text());
  CHECK(PhoneClassMap::parse("# c\nxx vowel\n").find("xx") == PhoneClass::vowel);
  CHECK_THROWS_AS(PhoneClassMap::parse("xx notaclass\n"), Error);
}

TEST_CASE("transition regions") {
  const auto cv = classes_of({{PhoneClass::other, 2}, {PhoneClass::stop, 8},
                              {PhoneClass::vowel, 10}});
  const auto r3 = transition_regions(cv, 3);
  CHECK(selected(r3.cv) == std::vector<int>{7, 8, 9, 10, 11, 12});
  CHECK(selected(r3.vc).empty());
  const auto r0 = transition_regions(cv, 0);
  CHECK(selected(r0.cv) == std::vector<int>{9, 10});

  const auto vowels = classes_of({{PhoneClass::vowel, 12}});
  const auto rv = transition_regions(vowels, 3);
  CHECK(selected(rv.cv).empty());
  CHECK(selected(rv.vc).empty());

  const auto vc = classes_of({{PhoneClass::vowel, 3}, {PhoneClass::nasal, 2},
                              {PhoneClass::other, 3}});
  const auto rvc = transition_regions(vc, 3);
  CHECK(selected(rvc.vc) == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("evaluate: identity, partition and pooling") {
  auto g = oracle::rng(42);
  const std::vector<std::string> phones{"sil", "p", "p", "iy", "iy", "iy", "s", "s", "n",
                                        "aa", "aa", "w", "jh", "jh", "ae", "sil"};
  std::vector<std::array<double, 3>> hz;
  for (std::size_t i = 0; i < phones.size(); ++i)
    hz.push_back({oracle::uniform(g, 300, 800), oracle::uniform(g, 900, 2000),
                  oracle::uniform(g, 2100, 3000)});
  const FormantTrack ref = label_track(phones, hz);
  const PhoneClassMap m = PhoneClassMap::timit_default();

  const EvalReport zero = evaluate(ref, ref, m);
  for (const auto& row : zero.rows) {
    CHECK(row.mae_hz == 0.0);
    CHECK(row.mape_pct == 0.0);
  }

  FormantTrack pred = ref;
  for (auto& f : pred.frames)
    for (auto& x : f.hz) x += oracle::uniform(g, -100, 100);
  const EvalReport rep = evaluate(pred, ref, m);
  for (const char* fm : {"F1", "F2", "F3"}) {
    const EvalRow* all = rep.find("overall", "all", fm);
    REQUIRE(all != nullptr);
    CHECK(all->frames == 14);
    Index count = 0;
    double weighted = 0;
    for (PhoneClass c : kSpeechClasses) {
      const EvalRow* row = rep.find("class", class_name(c), fm);
      if (!row) continue;
      count += row->frames;
      weighted += row->mae_hz * double(row->frames);
    }
    CHECK(count == all->frames);
    CHECK(std::abs(weighted / double(count) - all->mae_hz) < 1e-9);
  }
  const EvalRow* pooled = rep.find("overall", "all", "overall");
  REQUIRE(pooled != nullptr);
  double mean_mape = 0;
  for (const char* fm : {"F1", "F2", "F3"}) mean_mape += rep.find("overall", "all", fm)->mape_pct;
  CHECK(std::abs(pooled->mape_pct - mean_mape / 3.0) < 1e-9);
  CHECK(rep.find("class", "other", "F1") == nullptr);

  const std::string csv = rep.to_csv();
  CHECK(csv.rfind("scope,region,formant,mae_hz,mape_pct,frames\n", 0) == 0);
  CHECK(!rep.to_table().empty());
}

TEST_CASE("pairing by time") {
  FormantTrack pred, ref;
  for (int i = 0; i < 10; ++i) {
    FormantFrame f;
    f.time_s = 0.015 + 0.01 * i;
    f.hz = {500.0 + i, 1500, 2500};
    f.is_speech = true;
    pred.frames.push_back(f);
  }
  for (int i = 0; i < 14; ++i) {
    FormantFrame f;
    f.time_s = 0.005 + 0.01 * i;
    f.hz = {600, 1600, 2600};
    f.phone = "V";
    f.is_speech = true;
    ref.frames.push_back(f);
  }
  const TrackPair p = pair_by_time(pred, ref);
  REQUIRE(p.ref.frames.size() == 10);
  for (std::size_t i = 0; i < 10; ++i)
    CHECK(std::abs(p.pred.frames[i].time_s - p.ref.frames[i].time_s) < 0.005 + 1e-12);
  CHECK(p.ref.frames.front().time_s == doctest::Approx(0.015));
}
