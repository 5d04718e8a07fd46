#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <sstream>

#include "dyad/core/serialize.hpp"

using namespace dyad;

TEST_CASE("dyfw round-trips a mixed layer stack", "[core][serialize]") {
  Rng rng(21);
  Network net;
  net.layers.push_back(Conv1d(1, 4, 5, 1, 40));
  net.layers.push_back(Activation(Act::tanh));
  net.layers.push_back(MaxPool1d(4, 2, 36));
  net.layers.push_back(Dense(72, 8));
  net.init(rng);
  LstmCell cell(8, 16);
  cell.init(rng);

  std::vector<dyfw::Record> records;
  for (const Layer& l : net.layers) records.push_back(dyfw::to_record(l));
  records.push_back(dyfw::to_record(cell));

  std::stringstream buf;
  dyfw::write(buf, records);
  auto back = dyfw::read(buf);
  REQUIRE(back.size() == 5);

  Network net2;
  for (std::size_t i = 0; i < 4; ++i) net2.layers.push_back(dyfw::to_layer(back[i]));
  LstmCell cell2 = dyfw::to_lstm(back[4]);

  // weights identical bit for bit
  auto p1 = net.params();
  auto p2 = net2.params();
  REQUIRE(p1.size() == p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) REQUIRE(*p1[i] == *p2[i]);
  REQUIRE(cell.Wx == cell2.Wx);
  REQUIRE(cell.Wh == cell2.Wh);
  REQUIRE(cell.b == cell2.b);

  // forwards agree
  Matrix x(2, 40);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.01 * static_cast<double>(i);
  REQUIRE(net.forward(x) == net2.forward(x));
}

TEST_CASE("dyfw rejects foreign and truncated files", "[core][serialize]") {
  std::stringstream bad("not a weight file at all");
  REQUIRE_THROWS_AS(dyfw::read(bad), DataError);

  Rng rng(3);
  Network net;
  net.layers.push_back(Dense(4, 4));
  net.init(rng);
  std::stringstream buf;
  dyfw::write(buf, {dyfw::to_record(net.layers[0])});
  std::string bytes = buf.str();
  std::stringstream cut(bytes.substr(0, bytes.size() / 2));
  REQUIRE_THROWS_AS(dyfw::read(cut), DataError);
}
