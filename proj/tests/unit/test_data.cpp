#include <doctest.h>

#include <sstream>

#include "jlct/data.hpp"
#include "jlct/error.hpp"

using namespace jlct;

namespace {

VariableRoles roles_x(std::vector<std::string> vars) {
  VariableRoles r;
  r.split_vars = vars;
  r.survival_vars = vars;
  return r;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Usage;
}

const char* kThreeSubjects =
    "ID,time,y,X1,X2,X3,X4,X5,T,delta\n"
    "a,0,1.5,0.1,0.2,1,0.3,2,4,1\n"
    "a,1,1.7,0.1,0.2,1,0.3,2,4,1\n"
    "b,0.5,0.2,0.9,0.8,0,0.1,5,2,0\n"
    "c,0.2,2.0,0.5,0.5,1,0.5,3,3.5,1\n"
    "c,1.2,2.1,0.5,0.6,0,0.5,3,3.5,1\n"
    "c,2.2,2.2,0.5,0.7,0,0.5,4,3.5,1\n";

}  // namespace

TEST_CASE("csv ingestion groups rows by subject") {
  std::istringstream in(kThreeSubjects);
  const auto data = read_csv(in, roles_x({"X1", "X2", "X3", "X4", "X5"}));
  CHECK(data.n_subjects() == 3);
  CHECK(data.n_records() == 6);
  CHECK(data.subjects()[2].id == "c");
  CHECK(data.subjects()[2].records[1].covariates[1] == doctest::Approx(0.6));
  CHECK(data.subjects()[1].event.status == 0);
}

TEST_CASE("csv ingestion errors") {
  SUBCASE("missing role column") {
    std::istringstream in("ID,time,y,X1,T,delta\na,0,1,0.5,2,1\n");
    CHECK(kind_of([&] { read_csv(in, roles_x({"X1", "X3"})); }) == ErrorKind::MissingColumn);
  }
  SUBCASE("times out of order") {
    std::istringstream in("ID,time,y,X1,T,delta\n7,2.0,1,0.5,3,1\n7,1.0,1,0.5,3,1\n");
    CHECK(kind_of([&] { read_csv(in, roles_x({"X1"})); }) == ErrorKind::Ordering);
  }
  SUBCASE("event columns not constant") {
    std::istringstream in("ID,time,y,X1,T,delta\n7,1.0,1,0.5,3,1\n7,2.0,1,0.5,4,1\n");
    CHECK(kind_of([&] { read_csv(in, roles_x({"X1"})); }) == ErrorKind::Inconsistent);
  }
  SUBCASE("unparsable value") {
    std::istringstream in("ID,time,y,X1,T,delta\n7,1.0,abc,0.5,3,1\n");
    CHECK(kind_of([&] { read_csv(in, roles_x({"X1"})); }) == ErrorKind::Parse);
  }
  SUBCASE("event before last measurement") {
    std::istringstream in("ID,time,y,X1,T,delta\n7,1.0,1,0.5,3,1\n7,4.0,1,0.5,3,1\n");
    CHECK(kind_of([&] { read_csv(in, roles_x({"X1"})); }) == ErrorKind::Inconsistent);
  }
}

TEST_CASE("csv round trip is exact") {
  std::istringstream in(kThreeSubjects);
  const auto roles = roles_x({"X1", "X2", "X3", "X4", "X5"});
  const auto data = read_csv(in, roles);
  std::ostringstream out;
  write_csv(out, data, roles);
  std::istringstream again(out.str());
  const auto back = read_csv(again, roles);
  std::ostringstream out2;
  write_csv(out2, back, roles);
  CHECK(out.str() == out2.str());
}

TEST_CASE("counting-process conversion of the CD4 example") {
  // One subject seen at 0, 10, 20 (age 45; CD4 27, 31, 25), dying at 27.
  SubjectRecords s{"1", {{0, 0, {45, 27}}, {10, 0, {45, 31}}, {20, 0, {45, 25}}}, {27, 1}};
  const auto ltrc = to_ltrc(LongDataset({"Age", "CD4"}, {s}));
  REQUIRE(ltrc.size() == 3);
  CHECK(ltrc.start == std::vector<double>{0, 10, 20});
  CHECK(ltrc.stop == std::vector<double>{10, 20, 27});
  CHECK(ltrc.status == std::vector<int>{0, 0, 1});
  CHECK(ltrc.covariates(0, 1) == 27);
  CHECK(ltrc.covariates(1, 1) == 31);
  CHECK(ltrc.covariates(2, 1) == 25);
  CHECK(ltrc.covariates(2, 0) == 45);
}

TEST_CASE("counting-process edge cases") {
  SUBCASE("single measurement") {
    SubjectRecords s{"1", {{0, 0, {1}}}, {5, 0}};
    const auto ltrc = to_ltrc(LongDataset({"x"}, {s}));
    REQUIRE(ltrc.size() == 1);
    CHECK(ltrc.start[0] == 0);
    CHECK(ltrc.stop[0] == 5);
    CHECK(ltrc.status[0] == 0);
  }
  SUBCASE("measurement at the event time is dropped and its event kept") {
    SubjectRecords s{"1", {{1, 0, {1}}, {3, 0, {2}}}, {3, 1}};
    const auto ltrc = to_ltrc(LongDataset({"x"}, {s}));
    REQUIRE(ltrc.size() == 1);
    CHECK(ltrc.start[0] == 1);
    CHECK(ltrc.stop[0] == 3);
    CHECK(ltrc.status[0] == 1);
    CHECK(ltrc.covariates(0, 0) == 1);
  }
}

TEST_CASE("first-encountered conversion") {
  SubjectRecords s{"1", {{0, 0, {0.2, 1}}, {1, 0, {0.9, 1}}, {2, 0, {0.4, 1}}}, {3, 1}};
  const LongDataset data({"X1", "X3"}, {s});
  const auto f = first_encountered(data, {"X1"});
  for (const auto& r : f.subjects()[0].records) CHECK(r.covariates[0] == 0.2);
  const auto g = first_encountered(data, {"X3"});
  for (const auto& r : g.subjects()[0].records) CHECK(r.covariates[1] == 1);
  const auto h = first_encountered(data, {});
  CHECK(h.subjects()[0].records[1].covariates[0] == 0.9);

  const auto added = add_first_encountered_columns(data, {"X1"}, "first:");
  REQUIRE(added.has_covariate("first:X1"));
  const auto k = added.covariate_index("first:X1");
  CHECK(added.subjects()[0].records[2].covariates[k] == 0.2);
  CHECK(added.subjects()[0].records[2].covariates[0] == 0.4);
}

TEST_CASE("subject selection keeps the requested order") {
  std::istringstream in(kThreeSubjects);
  const auto data = read_csv(in, roles_x({"X1"}));
  const std::vector<std::size_t> pick{2, 0};
  const auto sub = data.select_subjects(pick);
  CHECK(sub.n_subjects() == 2);
  CHECK(sub.subjects()[0].id == "c");
  CHECK(sub.subjects()[1].id == "a");
}
