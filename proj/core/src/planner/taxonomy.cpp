#include "critter/planner/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <json.hpp>
#include <set>

#include "critter/util/binary_io.hpp"
#include "critter/util/error.hpp"

namespace critter::planner {

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      if (pending_space && !out.empty()) out += ' ';
      pending_space = false;
      out += static_cast<char>(std::tolower(c));
    } else if (c != '\'') {
      pending_space = true;
    }
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  const std::string norm = normalize_text(text);
  std::size_t start = 0;
  while (start < norm.size()) {
    const auto end = norm.find(' ', start);
    tokens.push_back(norm.substr(start, end == std::string::npos ? std::string::npos : end - start));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return tokens;
}

namespace {

int count_tokens(const std::string& normalized) {
  return normalized.empty() ? 0 : 1 + static_cast<int>(std::count(normalized.begin(), normalized.end(), ' '));
}

std::string fold(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void check_unique(const std::vector<std::string>& names, const char* kind) {
  if (names.empty()) throw InvalidArgument(std::string("taxonomy has no ") + kind);
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (normalize_text(n).empty()) throw InvalidArgument(std::string("empty ") + kind + " category");
    if (!seen.insert(fold(n)).second) throw InvalidArgument(std::string("duplicate ") + kind + " category '" + n + "'");
  }
}

std::string find_folded(const std::vector<std::string>& names, std::string_view name) {
  const std::string key = fold(name);
  for (const auto& n : names) {
    if (fold(n) == key) return n;
  }
  return {};
}

// Built-in vocabulary.

struct AnimalEntry {
  const char* name;
  std::vector<const char*> aliases;
};

const std::vector<AnimalEntry>& builtin_animals() {
  static const std::vector<AnimalEntry> table = {
      {"Anaconda", {"anacondas", "snake", "snakes"}},
      {"Ant", {"ants"}},
      {"Bat", {"bats"}},
      {"Bear", {"bears", "grizzly"}},
      {"Bird", {"birds"}},
      {"Buffalo", {"buffaloes", "buffalos", "bison"}},
      {"Buzzard", {"buzzards", "vulture"}},
      {"Camel", {"camels"}},
      {"Cat", {"cats", "kitten", "kitty"}},
      {"Centipede", {"centipedes"}},
      {"Chicken", {"chickens", "hen", "rooster"}},
      {"Cobra", {"cobras"}},
      {"Komodo", {"komodo dragon", "komodos"}},
      {"Coyote", {"coyotes"}},
      {"Crab", {"crabs"}},
      {"Cricket", {"crickets"}},
      {"Crocodile", {"crocodiles", "croc", "alligator"}},
      {"Crow", {"crows", "raven"}},
      {"Deer", {"stag", "doe"}},
      {"Dog", {"dogs"}},
      {"Eagle", {"eagles"}},
      {"Elephant", {"elephants"}},
      {"Fire Ant", {"fire ants"}},
      {"Flamingo", {"flamingos", "flamingoes"}},
      {"Fox", {"foxes"}},
      {"Gazelle", {"gazelles", "antelope"}},
      {"Giant Bee", {"bee", "bees", "giant bees"}},
      {"Goat", {"goats"}},
      {"Hamster", {"hamsters"}},
      {"Hermit Crab", {"hermit crabs"}},
      {"Hippopotamus", {"hippo", "hippos", "hippopotamuses"}},
      {"Horse", {"horses", "pony", "stallion"}},
      {"Hound", {"hounds"}},
      {"Isopetra", {}},
      {"Jaguar", {"jaguars"}},
      {"Leopard", {"leopards"}},
      {"Lion", {"lions", "lioness"}},
      {"Lynx", {"lynxes"}},
      {"Mammoth", {"mammoths"}},
      {"Monkey", {"monkeys", "ape"}},
      {"Ostrich", {"ostriches"}},
      {"Parrot", {"parrots"}},
      {"Pigeon", {"pigeons", "dove"}},
      {"Piranha", {"piranhas"}},
      {"Polar Bear", {"polar bears"}},
      {"Pteranodon", {"pteranodons", "pterodactyl"}},
      {"Puppy", {"puppies"}},
      {"Raptor", {"raptors", "velociraptor"}},
      {"Rat", {"rats"}},
      {"Reindeer", {"caribou"}},
      {"Rhino", {"rhinos", "rhinoceros"}},
      {"Roach", {"roaches", "cockroach", "cockroaches"}},
      {"Sand mouse", {"sand mice", "mouse", "mice"}},
      {"Scorpion", {"scorpions"}},
      {"Shark", {"sharks"}},
      {"Skunk", {"skunks"}},
      {"Spider", {"spiders"}},
      {"Stegosaurus", {"stegosauruses"}},
      {"Tricera", {"triceratops"}},
      {"Toucan", {"toucans"}},
      {"Turtle", {"turtles", "tortoise"}},
      {"Tyrannosaurus Rex", {"t rex", "trex", "tyrannosaurus"}},
      {"Wyvern", {"wyverns", "dragon"}},
      {"Rabbit", {"rabbits", "bunny", "hare"}},
      {"Wolf", {"wolves"}},
  };
  return table;
}

struct MotionEntry {
  const char* name;
  std::vector<std::string> verb_forms;
  std::vector<std::string> modifiers;  // when set, aliases are verb x modifier
  std::vector<std::string> extra;
};

const std::vector<std::string> kWalk = {"walk", "walks", "walked", "walking"};
const std::vector<std::string> kRun = {"run", "runs", "ran", "running"};
const std::vector<std::string> kTurn = {"turn", "turns", "turned", "turning"};
const std::vector<std::string> kLie = {"lie", "lies", "lay", "lying", "lays", "laid"};
const std::vector<std::string> kStand = {"stand", "stands", "stood", "standing"};

const std::vector<MotionEntry>& builtin_motions() {
  static const std::vector<MotionEntry> table = {
      {"Attack", {"attack", "attacks", "attacked", "attacking"}, {}, {"strike", "strikes", "lunges"}},
      {"Bite", {"bite", "bites", "bit", "biting", "bitten"}, {}, {}},
      {"Low Bite", {}, {}, {"low bite", "low bites"}},
      {"Walk", kWalk, {}, {"stroll", "strolls", "strolled"}},
      {"Walk Quick", kWalk, {"quick", "quickly", "fast", "briskly"}, {"quick walk"}},
      {"Walk Slow", kWalk, {"slow", "slowly"}, {"slow walk"}},
      {"Walk Out", kWalk, {"out"}, {}},
      {"Walk Left", kWalk, {"left"}, {}},
      {"Walk Right", kWalk, {"right"}, {}},
      {"Run", kRun, {}, {"sprint", "sprints", "sprinted", "sprinting", "dash", "dashes"}},
      {"Run Forward", kRun, {"forward", "forwards", "ahead"}, {}},
      {"Trot", {"trot", "trots", "trotted", "trotting"}, {}, {}},
      {"Gallop", {"gallop", "gallops", "galloped", "galloping"}, {}, {}},
      {"Jump", {"jump", "jumps", "jumped", "jumping", "leap", "leaps", "leapt", "leaped", "leaping"}, {}, {}},
      {"Hop", {"hop", "hops", "hopped", "hopping"}, {}, {}},
      {"Idle", {"idle", "idles", "idling"}, {}, {"stands still", "standing still", "stood still", "rest", "rests"}},
      {"Sit", {"sit", "sits", "sat", "sitting"}, {}, {}},
      {"Lie Down", kLie, {"down"}, {}},
      {"Sleep", {"sleep", "sleeps", "slept", "sleeping", "asleep"}, {}, {}},
      {"Eat", {"eat", "eats", "ate", "eating", "eaten", "graze", "grazes", "grazing"}, {}, {}},
      {"Drink", {"drink", "drinks", "drank", "drinking"}, {}, {}},
      {"Die", {"die", "dies", "died", "dying"}, {}, {"dead"}},
      {"Get Hit", {"get", "gets", "got", "getting"}, {"hit"}, {"is hit", "was hit"}},
      {"Roar", {"roar", "roars", "roared", "roaring", "growl", "growls"}, {}, {}},
      {"Fly", {"fly", "flies", "flew", "flying", "flown"}, {}, {}},
      {"Glide", {"glide", "glides", "glided", "gliding", "soar", "soars", "soared", "soaring"}, {}, {}},
      {"Take Off", {"take", "takes", "took", "taking"}, {"off"}, {}},
      {"Swim", {"swim", "swims", "swam", "swimming"}, {}, {}},
      {"Crawl", {"crawl", "crawls", "crawled", "crawling"}, {}, {}},
      {"Slither", {"slither", "slithers", "slithered", "slithering"}, {}, {}},
      {"Turn Left", kTurn, {"left"}, {}},
      {"Turn Right", kTurn, {"right"}, {}},
      {"Look Around", {"look", "looks", "looked", "looking"}, {"around"}, {}},
      {"Dig", {"dig", "digs", "dug", "digging"}, {}, {}},
      {"Shake", {"shake", "shakes", "shook", "shaking"}, {}, {}},
      {"Howl", {"howl", "howls", "howled", "howling"}, {}, {}},
      {"Peck", {"peck", "pecks", "pecked", "pecking"}, {}, {}},
      {"Scratch", {"scratch", "scratches", "scratched", "scratching"}, {}, {}},
      {"Stand Up", kStand, {"up"}, {"rises", "rose"}},
  };
  return table;
}

}  // namespace

Taxonomy::Taxonomy(std::vector<std::string> animals, std::vector<std::string> motions,
                   std::map<std::string, std::string> aliases, std::string fallback_animal,
                   std::string fallback_motion)
    : animals_(std::move(animals)),
      motions_(std::move(motions)),
      aliases_(std::move(aliases)),
      fallback_animal_(std::move(fallback_animal)),
      fallback_motion_(std::move(fallback_motion)) {
  check_unique(animals_, "animal");
  check_unique(motions_, "motion");
  for (const auto& a : animals_) animal_index_[normalize_text(a)] = a;
  for (const auto& m : motions_) motion_index_[normalize_text(m)] = m;
  for (const auto& [surface, category] : aliases_) {
    const std::string key = normalize_text(surface);
    if (key.empty()) throw InvalidArgument("empty alias for '" + category + "'");
    const std::string animal = find_folded(animals_, category);
    const std::string motion = find_folded(motions_, category);
    if (animal.empty() && motion.empty()) {
      throw InvalidArgument("alias '" + surface + "' maps to unknown category '" + category + "'");
    }
    if (!animal.empty()) animal_index_.emplace(key, animal);
    if (!motion.empty()) motion_index_.emplace(key, motion);
  }
  for (const auto* index : {&animal_index_, &motion_index_}) {
    for (const auto& [key, _] : *index) max_alias_tokens_ = std::max(max_alias_tokens_, count_tokens(key));
  }
  if (!fallback_animal_.empty()) {
    const std::string c = find_folded(animals_, fallback_animal_);
    if (c.empty()) throw InvalidArgument("fallback animal '" + fallback_animal_ + "' is not a category");
    fallback_animal_ = c;
  }
  if (!fallback_motion_.empty()) {
    const std::string c = find_folded(motions_, fallback_motion_);
    if (c.empty()) throw InvalidArgument("fallback motion '" + fallback_motion_ + "' is not a category");
    fallback_motion_ = c;
  }
}

Taxonomy Taxonomy::builtin() {
  std::vector<std::string> animals;
  std::vector<std::string> motions;
  std::map<std::string, std::string> aliases;
  for (const auto& a : builtin_animals()) {
    animals.emplace_back(a.name);
    for (const char* alias : a.aliases) aliases.emplace(alias, a.name);
  }
  for (const auto& m : builtin_motions()) {
    motions.emplace_back(m.name);
    if (m.modifiers.empty()) {
      for (const auto& v : m.verb_forms) aliases.emplace(v, m.name);
    } else {
      for (const auto& v : m.verb_forms) {
        for (const auto& mod : m.modifiers) aliases.emplace(v + " " + mod, m.name);
      }
    }
    for (const auto& e : m.extra) aliases.emplace(e, m.name);
  }
  return Taxonomy(std::move(animals), std::move(motions), std::move(aliases), "Dog", "Idle");
}

Taxonomy Taxonomy::from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
    std::map<std::string, std::string> aliases;
    if (doc.contains("aliases")) aliases = doc.at("aliases").get<std::map<std::string, std::string>>();
    return Taxonomy(doc.at("animals").get<std::vector<std::string>>(), doc.at("motions").get<std::vector<std::string>>(),
                    std::move(aliases), doc.value("fallback_animal", std::string{}),
                    doc.value("fallback_motion", std::string{}));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid taxonomy JSON: ") + e.what());
  }
}

Taxonomy Taxonomy::load(const std::string& path) { return from_json(io::read_file_text(path)); }

std::string Taxonomy::to_json() const {
  nlohmann::json doc;
  doc["animals"] = animals_;
  doc["motions"] = motions_;
  doc["aliases"] = aliases_;
  doc["fallback_animal"] = fallback_animal_;
  doc["fallback_motion"] = fallback_motion_;
  return doc.dump(2);
}

std::string Taxonomy::canonical_animal(std::string_view name) const {
  const std::string key = normalize_text(name);
  for (const auto& a : animals_) {
    if (normalize_text(a) == key) return a;
  }
  return {};
}

std::string Taxonomy::canonical_motion(std::string_view name) const {
  const std::string key = normalize_text(name);
  for (const auto& m : motions_) {
    if (normalize_text(m) == key) return m;
  }
  return {};
}

namespace {

std::vector<Candidate> match_kind(const std::vector<std::string>& tokens,
                                  const std::map<std::string, std::string>& index, int max_len) {
  std::map<std::string, Candidate> best;
  for (int len = 1; len <= max_len; ++len) {
    for (int pos = 0; pos + len <= static_cast<int>(tokens.size()); ++pos) {
      std::string gram = tokens[static_cast<std::size_t>(pos)];
      for (int k = 1; k < len; ++k) gram += " " + tokens[static_cast<std::size_t>(pos + k)];
      const auto hit = index.find(gram);
      if (hit == index.end()) continue;
      Candidate c{hit->second, gram, pos, len};
      auto [it, inserted] = best.emplace(hit->second, c);
      if (!inserted) {
        const Candidate& old = it->second;
        const bool longer = c.length > old.length ||
                            (c.length == old.length && c.alias.size() > old.alias.size());
        const bool same_len = c.length == old.length && c.alias.size() == old.alias.size();
        if (longer || (same_len && c.position < old.position)) it->second = c;
      }
    }
  }
  std::vector<Candidate> out;
  for (auto& [_, c] : best) out.push_back(std::move(c));
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    if (a.length != b.length) return a.length > b.length;
    if (a.alias.size() != b.alias.size()) return a.alias.size() > b.alias.size();
    if (a.position != b.position) return a.position < b.position;
    return a.category < b.category;
  });
  return out;
}

}  // namespace

MatchResult match_taxonomy(std::string_view query, const Taxonomy& taxonomy) {
  const auto tokens = tokenize(query);
  return {match_kind(tokens, taxonomy.animal_index(), taxonomy.max_alias_tokens()),
          match_kind(tokens, taxonomy.motion_index(), taxonomy.max_alias_tokens())};
}

}  // namespace critter::planner
