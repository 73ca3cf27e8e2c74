#include "lect/lexicon.hpp"

#include <algorithm>
#include <set>

#include "lect/encoders.hpp"

namespace lect {

const std::vector<Domain>& domain_lexicon() {
  static const std::vector<Domain> lexicon = {
      {"natural science",
       {"physics", "chemistry", "biology", "astronomy", "geology", "ecology", "genetics",
        "neuroscience", "zoology", "botany"},
       {"experiment", "laboratory", "measurement", "hypothesis", "observation", "specimen",
        "evidence", "findings", "empirical", "instrument", "calibrated", "replicated"},
       {{"oceanography", {"tide", "salinity", "reef", "seabed", "plankton", "trench", "upwelling", "brine"}},
        {"meteorology", {"storm", "humidity", "rainfall", "cyclone", "barometer", "monsoon", "drizzle", "jetstream"}},
        {"mineralogy", {"crystal", "quartz", "lattice", "ore", "feldspar", "cleavage", "garnet", "basalt"}},
        {"paleontology", {"fossil", "dinosaur", "sediment", "extinction", "amber", "trilobite", "jurassic", "stratum"}},
        {"materials science", {"alloy", "polymer", "ceramic", "fracture", "composite", "hardness", "annealing", "tensile"}},
        {"epidemiology", {"outbreak", "incidence", "cohort", "vaccine", "transmission", "prevalence", "contagion", "surveillance"}},
        {"astronomy", {"telescope", "galaxy", "orbit", "planet", "star", "cosmic", "nebula", "satellite"}},
        {"geology", {"rock", "volcano", "tectonic", "erosion", "magma", "earthquake", "mantle", "canyon"}},
        {"ecology", {"habitat", "predator", "biodiversity", "wetland", "pollinator", "foodweb", "forest", "invasive"}},
        {"genetics", {"dna", "heredity", "locus", "sequencing", "crispr", "inheritance", "genotype", "haplotype"}}}},
      {"computer science",
       {"neural networks", "theory", "reinforcement learning", "genetic algorithms",
        "probabilistic methods", "case based", "rule learning", "databases", "agents",
        "information retrieval", "machine learning", "artificial intelligence",
        "human computer interaction"},
       {"algorithm", "framework", "benchmark", "implementation", "scalable", "proposed",
        "efficient", "architecture", "baseline", "software", "computational", "complexity"},
       {{"computer vision", {"pixel", "segmentation", "camera", "convolution", "stereo", "optical", "bounding", "keypoint"}},
        {"natural language processing", {"parsing", "syntax", "translation", "corpus", "lexical", "sentiment", "tokenizer", "discourse"}},
        {"robotics", {"actuator", "gripper", "manipulator", "locomotion", "servo", "odometry", "kinematic", "lidar"}},
        {"cryptography", {"cipher", "encryption", "signature", "hashing", "plaintext", "lattices", "zero", "knowledge"}},
        {"compilers", {"lexer", "bytecode", "register", "inlining", "dataflow", "linker", "codegen", "ssa"}},
        {"computer graphics", {"shading", "rasterization", "mesh", "texture", "raytracing", "voxel", "polygon", "rendering"}}}},
      {"medicine",
       {"diabetes mellitus experimental", "diabetes mellitus type 1", "diabetes mellitus type 2",
        "cardiology", "oncology", "neurology", "pediatrics"},
       {"patients", "clinical", "treatment", "trial", "therapy", "diagnosis", "hospital",
        "symptoms", "dosage", "chronic", "randomized", "physician"},
       {{"dermatology", {"skin", "eczema", "psoriasis", "lesion", "melanoma", "rash", "acne", "dermal"}},
        {"ophthalmology", {"retina", "glaucoma", "cataract", "cornea", "vision", "intraocular", "macular", "pupil"}},
        {"orthopedics", {"cast", "cartilage", "ligament", "arthroplasty", "tendon", "osteoporosis", "spine", "splint"}},
        {"psychiatry", {"depression", "anxiety", "schizophrenia", "antidepressant", "bipolar", "psychosis", "mood", "counseling"}},
        {"dentistry", {"tooth", "enamel", "cavity", "gum", "orthodontic", "molar", "plaque", "implant"}}}},
      {"consumer electronics",
       {"cameras", "lenses", "tripods", "video", "flashes", "film photography", "accessories",
        "binoculars", "digital cameras"},
       {"product", "quality", "price", "purchased", "recommend", "battery", "warranty",
        "shipping", "customer", "brand", "durable", "review"},
       {{"audio equipment", {"headphones", "speaker", "amplifier", "subwoofer", "earbuds", "equalizer", "bass", "microphone"}},
        {"smart home", {"thermostat", "doorbell", "hub", "assistant", "plug", "automation", "sensor", "bulb"}},
        {"gaming consoles", {"controller", "joystick", "console", "cartridge", "multiplayer", "handheld", "gamepad", "arcade"}},
        {"wearables", {"smartwatch", "tracker", "wristband", "heartrate", "pedometer", "strap", "notifications", "fitness"}}}},
      {"sports",
       {"football", "basketball", "tennis", "athletics", "swimming", "cycling"},
       {"season", "championship", "coach", "league", "match", "victory", "tournament",
        "players", "stadium", "fans", "scored", "training"},
       {{"mountaineering", {"summit", "crampon", "belay", "glacier", "altitude", "sherpa", "ascent", "ridge"}},
        {"sailing", {"regatta", "hull", "spinnaker", "keel", "mast", "tack", "harbor", "dinghy"}},
        {"chess", {"checkmate", "gambit", "bishop", "rook", "pawn", "endgame", "opening", "grandmaster"}},
        {"equestrian", {"saddle", "dressage", "stallion", "gallop", "jockey", "bridle", "paddock", "hoof"}}}},
      {"cuisine",
       {"baking", "grilling", "desserts", "vegetarian", "seafood", "beverages"},
       {"recipe", "flavor", "ingredients", "kitchen", "delicious", "served", "cooked",
        "taste", "chef", "fresh", "minutes", "oven"},
       {{"winemaking", {"vineyard", "tannin", "vintage", "fermentation", "barrel", "sommelier", "grape", "cellar"}},
        {"coffee roasting", {"espresso", "arabica", "roaster", "crema", "barista", "beans", "grinder", "brew"}},
        {"cheesemaking", {"curd", "rennet", "brie", "cheddar", "whey", "aging", "rind", "dairy"}},
        {"street food", {"vendor", "skewer", "taco", "dumpling", "noodle", "stall", "spicy", "snack"}}}},
  };
  return lexicon;
}

std::size_t classify_domain(std::span<const std::string> class_names) {
  const auto& lexicon = domain_lexicon();
  std::set<std::string> name_tokens;
  for (const auto& name : class_names) {
    for (auto& t : tokenize(name)) name_tokens.insert(std::move(t));
  }
  std::size_t best = 0;
  int best_score = -1;
  for (std::size_t d = 0; d < lexicon.size(); ++d) {
    int score = 0;
    for (const auto& name : class_names) {
      const auto& members = lexicon[d].member_labels;
      std::string lowered;
      for (const auto& t : tokenize(name)) lowered += (lowered.empty() ? "" : " ") + t;
      if (std::find(members.begin(), members.end(), lowered) != members.end()) score += 4;
    }
    for (const auto& member : lexicon[d].member_labels) {
      for (const auto& t : tokenize(member)) score += static_cast<int>(name_tokens.count(t));
    }
    for (const auto& word : lexicon[d].register_words) score += static_cast<int>(name_tokens.count(word));
    if (score > best_score) {
      best_score = score;
      best = d;
    }
  }
  return best;
}

const std::vector<std::string>& random_text_vocabulary() {
  static const std::vector<std::string> vocab = [] {
    std::vector<std::string> words;
    for (const auto& domain : domain_lexicon()) {
      words.insert(words.end(), domain.register_words.begin(), domain.register_words.end());
      for (const auto& cat : domain.adjacent) {
        words.insert(words.end(), cat.keywords.begin(), cat.keywords.end());
      }
    }
    return words;
  }();
  return vocab;
}

}  // namespace lect
