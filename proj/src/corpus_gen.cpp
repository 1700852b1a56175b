#include "duality/corpus_gen.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <vector>

#include "duality/rng.hpp"
#include "duality/text_data.hpp"

namespace duality {

namespace {

const std::vector<std::string>& names() {
  static const std::vector<std::string> v = {
      "The Eagle",         "The Golden Curry",  "Bibimbap House",
      "The Mill",          "Blue Spice",        "The Cricketers",
      "The Vaults",        "The Rice Boat",     "The Wrestlers",
      "Alimentum",         "Aromi",             "Browns Cambridge",
      "Clowns",            "Cocum",             "Cotto",
      "Fitzbillies",       "Giraffe",           "Green Man",
      "Loch Fyne",         "Midsummer House",   "Strada",
      "Taste of Cambridge", "The Cambridge Blue", "The Dumpling Tree",
      "The Golden Palace", "The Olive Grove",   "The Phoenix",
      "The Plough",        "The Punter",        "The Twenty Two",
      "The Waterman",      "Travellers Rest Beefeater", "Wildwood",
      "Zizzi"};
  return v;
}

const std::vector<std::string>& nears() {
  static const std::vector<std::string> v = {
      "Clare Hall",       "Crowne Plaza Hotel",     "Cafe Sicilia",
      "Cafe Adriatic",    "Cafe Brazil",            "Cafe Rouge",
      "All Bar One",      "Avalon",                 "Burger King",
      "Express by Holiday Inn", "Raja Indian Cuisine", "Rainbow Vegetarian Cafe",
      "Ranch",            "The Bakers",             "The Portland Arms",
      "The Six Bells",    "The Sorrento",           "Yippee Noodle Bar",
      "Riverside Gallery"};
  return v;
}

const std::vector<std::string>& eat_types() {
  static const std::vector<std::string> v = {"coffee shop", "pub",
                                             "restaurant"};
  return v;
}

const std::vector<std::string>& foods() {
  static const std::vector<std::string> v = {
      "Chinese", "English", "Fast food", "French", "Indian", "Italian",
      "Japanese"};
  return v;
}

const std::vector<std::string>& price_ranges() {
  static const std::vector<std::string> v = {
      "cheap", "high", "moderate", "less than £20", "more than £30",
      "£20-25"};
  return v;
}

const std::vector<std::string>& ratings() {
  static const std::vector<std::string> v = {
      "1 out of 5", "3 out of 5", "5 out of 5", "average", "low", "high"};
  return v;
}

const std::vector<std::string>& areas() {
  static const std::vector<std::string> v = {"city centre", "riverside"};
  return v;
}

const std::vector<std::string>& family_values() {
  static const std::vector<std::string> v = {"no", "yes"};
  return v;
}

struct Mr {
  // slot -> value; name always present
  std::map<std::string, std::string> slots;
  std::string render() const {
    // fixed slot order mirrors the official files
    static const std::vector<std::string> order = {
        "name",          "eatType", "food", "priceRange",
        "customer rating", "area",    "familyFriendly", "near"};
    std::string out;
    for (const auto& slot : order) {
      auto it = slots.find(slot);
      if (it == slots.end()) continue;
      if (!out.empty()) out += ", ";
      out += slot + "[" + it->second + "]";
    }
    return out;
  }
};

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[static_cast<std::size_t>(rng.uniform_int(v.size()))];
}

Mr sample_mr(Rng& rng) {
  Mr mr;
  mr.slots["name"] = pick(names(), rng);
  if (rng.uniform() < 0.72) mr.slots["eatType"] = pick(eat_types(), rng);
  if (rng.uniform() < 0.72) mr.slots["food"] = pick(foods(), rng);
  if (rng.uniform() < 0.62) mr.slots["priceRange"] = pick(price_ranges(), rng);
  if (rng.uniform() < 0.62) mr.slots["customer rating"] = pick(ratings(), rng);
  if (rng.uniform() < 0.55) mr.slots["area"] = pick(areas(), rng);
  if (rng.uniform() < 0.55)
    mr.slots["familyFriendly"] = pick(family_values(), rng);
  if (rng.uniform() < 0.55) mr.slots["near"] = pick(nears(), rng);
  return mr;
}

std::string price_phrase(const std::string& value, Rng& rng) {
  if (value == "cheap" || value == "moderate" || value == "high") {
    switch (rng.uniform_int(3)) {
      case 0:
        return "has " + value + " prices";
      case 1:
        return value == "moderate" ? "is moderately priced"
                                   : "is " + value + " in price";
      default:
        return "offers food at " + value + " prices";
    }
  }
  switch (rng.uniform_int(3)) {
    case 0:
      return "has a price range of " + value;
    case 1:
      return "serves meals costing " + value;
    default:
      return "has meals priced at " + value;
  }
}

std::string rating_phrase(const std::string& value, Rng& rng) {
  switch (rng.uniform_int(3)) {
    case 0:
      return "has a " + value + " customer rating";
    case 1:
      return "is rated " + value + " by customers";
    default:
      return "earned a customer rating of " + value;
  }
}

std::string family_phrase(const std::string& value, Rng& rng) {
  if (value == "yes") {
    switch (rng.uniform_int(3)) {
      case 0:
        return "it is family friendly";
      case 1:
        return "it welcomes children";
      default:
        return "it is child friendly";
    }
  }
  switch (rng.uniform_int(3)) {
    case 0:
      return "it is not family friendly";
    case 1:
      return "it is an adults only venue";
    default:
      return "children are not welcome";
  }
}

std::string food_phrase(const std::string& value, Rng& rng) {
  switch (rng.uniform_int(4)) {
    case 0:
      return "serving " + value + " food";
    case 1:
      return "offering " + value + " cuisine";
    case 2:
      return "that serves " + value + " dishes";
    default:
      return "providing " + value + " food";
  }
}

std::string area_phrase(const std::string& value, Rng& rng) {
  if (value == "riverside")
    return rng.uniform() < 0.5 ? "in the riverside area" : "by the riverside";
  return rng.uniform() < 0.5 ? "in the city centre" : "in the centre of the city";
}

std::string near_phrase(const std::string& value, Rng& rng) {
  switch (rng.uniform_int(3)) {
    case 0:
      return "near " + value;
    case 1:
      return "close to " + value;
    default:
      return "not far from " + value;
  }
}

bool keep(Rng& rng, double drop_prob) { return rng.uniform() >= drop_prob; }

std::string realize(const Mr& mr, Rng& rng, double drop_prob) {
  auto get = [&](const char* slot) {
    auto it = mr.slots.find(slot);
    return it == mr.slots.end() ? std::string() : it->second;
  };
  const std::string name = get("name");
  const std::string etype = get("eatType");
  const std::string food = get("food");
  const std::string price = get("priceRange");
  const std::string rating = get("customer rating");
  const std::string area = get("area");
  const std::string family = get("familyFriendly");
  const std::string near = get("near");

  const std::string noun = etype.empty()
                               ? (rng.uniform() < 0.5 ? "place" : "venue")
                               : etype;

  std::string first;
  const bool lead_with_area =
      !area.empty() && keep(rng, drop_prob) && rng.uniform() < 0.3;
  std::string area_part =
      (!area.empty() && keep(rng, drop_prob)) ? area_phrase(area, rng) : "";
  if (lead_with_area && !area_part.empty()) {
    first = "Located " + area_part + ", " + name + " is a " + noun;
    area_part.clear();
  } else {
    first = name + " is a " + noun;
  }
  if (!food.empty() && keep(rng, drop_prob))
    first += " " + food_phrase(food, rng);
  if (!area_part.empty()) first += " " + area_part;
  if (!near.empty() && keep(rng, drop_prob))
    first += " " + near_phrase(near, rng);
  first += ".";

  std::vector<std::string> second_clauses;
  if (!price.empty() && keep(rng, drop_prob))
    second_clauses.push_back("It " + price_phrase(price, rng));
  if (!rating.empty() && keep(rng, drop_prob)) {
    if (second_clauses.empty())
      second_clauses.push_back("It " + rating_phrase(rating, rng));
    else
      second_clauses.push_back("and " + rating_phrase(rating, rng));
  }
  std::string second;
  for (const auto& c : second_clauses) {
    if (!second.empty()) second += " ";
    second += c;
  }
  if (!second.empty()) second += ".";

  std::string third;
  if (!family.empty() && keep(rng, drop_prob)) {
    std::string f = family_phrase(family, rng);
    f[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(f[0])));
    third = f + ".";
  }

  std::string out = first;
  if (!second.empty()) out += " " + second;
  if (!third.empty()) out += " " + third;
  return out;
}

std::string csv_field(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    out += c;
    if (c == '"') out += '"';
  }
  out += "\"";
  return out;
}

// One MR per distinct slot-value pair, cycling through every inventory so
// the training label space always covers all 79 pairs.
std::vector<Mr> coverage_mrs(Rng& rng) {
  std::vector<Mr> out;
  auto push_with = [&](const std::string& slot, const std::string& value) {
    Mr mr = sample_mr(rng);
    if (slot == "name")
      mr.slots["name"] = value;
    else
      mr.slots[slot] = value;
    out.push_back(std::move(mr));
  };
  for (const auto& v : names()) push_with("name", v);
  for (const auto& v : nears()) push_with("near", v);
  for (const auto& v : eat_types()) push_with("eatType", v);
  for (const auto& v : foods()) push_with("food", v);
  for (const auto& v : price_ranges()) push_with("priceRange", v);
  for (const auto& v : ratings()) push_with("customer rating", v);
  for (const auto& v : areas()) push_with("area", v);
  for (const auto& v : family_values()) push_with("familyFriendly", v);
  return out;
}

void write_split(const std::string& path, const std::vector<Mr>& mrs,
                 Rng& rng, const CorpusGenOptions& opt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestError("cannot write '" + path + "'");
  out << "mr,ref\n";
  for (const auto& mr : mrs) {
    const int refs =
        opt.min_refs +
        static_cast<int>(rng.uniform_int(
            static_cast<std::uint64_t>(opt.max_refs - opt.min_refs + 1)));
    for (int r = 0; r < refs; ++r)
      out << csv_field(mr.render()) << ","
          << csv_field(realize(mr, rng, opt.drop_prob)) << "\n";
  }
}

}  // namespace

void synthesize_corpus(const std::string& out_dir,
                       const CorpusGenOptions& opt) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  Rng rng(opt.seed);

  std::vector<Mr> train = coverage_mrs(rng);
  while (static_cast<int>(train.size()) < opt.train_mrs)
    train.push_back(sample_mr(rng));
  rng.shuffle(train);

  std::vector<Mr> test;
  for (int i = 0; i < opt.test_mrs; ++i) test.push_back(sample_mr(rng));

  write_split((fs::path(out_dir) / "trainset.csv").string(), train, rng, opt);
  write_split((fs::path(out_dir) / "testset.csv").string(), test, rng, opt);
}

}  // namespace duality
