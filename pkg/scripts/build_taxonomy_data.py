#!/usr/bin/env python3
"""Regenerate src/stcert/data/imagenet_taxonomy.json.

The shipped file is a curated subset of the ImageNet/WordNet hierarchy:
enough fine-grained classes to exercise every super-class of the five
dataset specs, with hypernym chains written most-specific-first. Dataset
membership is derived from the chains, so editing the tables below is all
it takes to extend the catalog.

Class ids are catalog-internal (assigned in listing order). A full-scale
1000-class file with standard ImageNet indices can be produced by swapping
the tables for an NLTK WordNet walk in an environment that has the corpus;
the output schema is identical.
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from stcert.taxonomy import taxonomy_from_dict  # noqa: E402

OUT = Path(__file__).resolve().parents[1] / "src" / "stcert" / "data" / "imagenet_taxonomy.json"

# Shared chain suffixes
MAMMAL = ["placental", "mammal", "vertebrate", "chordate", "animal", "organism", "entity"]
VERT = ["vertebrate", "chordate", "animal", "organism", "entity"]
INVERT = ["invertebrate", "animal", "organism", "entity"]
ARTIFACT = ["artifact", "entity"]

# (chain most-specific-first, [(wnid, lemma), ...])
GROUPS = [
    (["shepherd dog", "working dog", "dog", "canine", "carnivore"] + MAMMAL,
     [("n02106662", "German_shepherd"), ("n02106030", "collie")]),
    (["sled dog", "working dog", "dog", "canine", "carnivore"] + MAMMAL,
     [("n02110185", "Siberian_husky"), ("n02110063", "malamute")]),
    (["retriever", "sporting dog", "hunting dog", "dog", "canine", "carnivore"] + MAMMAL,
     [("n02099712", "Labrador_retriever"), ("n02099601", "golden_retriever")]),
    (["hound", "hunting dog", "dog", "canine", "carnivore"] + MAMMAL,
     [("n02088364", "beagle"), ("n02091032", "Italian_greyhound")]),
    (["toy dog", "dog", "canine", "carnivore"] + MAMMAL,
     [("n02085620", "Chihuahua"), ("n02086240", "Shih-Tzu")]),
    (["domestic cat", "cat", "feline", "carnivore"] + MAMMAL,
     [("n02123045", "tabby"), ("n02123394", "Persian_cat"),
      ("n02123597", "Siamese_cat"), ("n02124075", "Egyptian_cat")]),
    (["big cat", "feline", "carnivore"] + MAMMAL,
     [("n02129165", "lion"), ("n02129604", "tiger"),
      ("n02128385", "leopard"), ("n02128925", "jaguar")]),
    (["bear", "carnivore"] + MAMMAL,
     [("n02132136", "brown_bear"), ("n02133161", "American_black_bear"),
      ("n02134084", "ice_bear")]),
    (["elephant", "proboscidean"] + MAMMAL,
     [("n02504013", "Indian_elephant"), ("n02504458", "African_elephant")]),
    (["monkey", "primate"] + MAMMAL,
     [("n02486410", "baboon"), ("n02487347", "macaque"),
      ("n02492660", "howler_monkey"), ("n02493793", "spider_monkey"),
      ("n02490219", "marmoset"), ("n02494079", "squirrel_monkey")]),
    (["bovid", "ruminant", "ungulate"] + MAMMAL,
     [("n02403003", "ox"), ("n02410509", "bison"),
      ("n02412080", "ram"), ("n02423022", "gazelle")]),
    (["finch", "oscine", "passerine", "bird"] + VERT,
     [("n01530575", "brambling"), ("n01531178", "goldfinch"),
      ("n01532829", "house_finch"), ("n01534433", "junco")]),
    (["corvine bird", "oscine", "passerine", "bird"] + VERT,
     [("n01580077", "jay"), ("n01582220", "magpie")]),
    (["thrush", "oscine", "passerine", "bird"] + VERT,
     [("n01558993", "robin")]),
    (["waterfowl", "aquatic bird", "bird"] + VERT,
     [("n01855672", "goose"), ("n01847000", "drake")]),
    (["sea bird", "aquatic bird", "bird"] + VERT,
     [("n02056570", "king_penguin")]),
    (["turtle", "reptile"] + VERT,
     [("n01664065", "loggerhead"), ("n01669191", "box_turtle"),
      ("n01667778", "terrapin")]),
    (["lizard", "reptile"] + VERT,
     [("n01675722", "banded_gecko"), ("n01677366", "common_iguana"),
      ("n01695060", "Komodo_dragon")]),
    (["snake", "reptile"] + VERT,
     [("n01734418", "king_snake"), ("n01742172", "boa_constrictor"),
      ("n01748264", "Indian_cobra"), ("n01749939", "green_mamba")]),
    (["frog", "amphibian"] + VERT,
     [("n01641577", "bullfrog"), ("n01644373", "tree_frog"),
      ("n01644900", "tailed_frog")]),
    (["salamander", "amphibian"] + VERT,
     [("n01632777", "axolotl"), ("n01629819", "European_fire_salamander")]),
    (["shark", "fish"] + VERT,
     [("n01484850", "great_white_shark"), ("n01491361", "tiger_shark"),
      ("n01494475", "hammerhead")]),
    (["ray", "fish"] + VERT,
     [("n01496331", "electric_ray"), ("n01498041", "stingray")]),
    (["cyprinid", "bony fish", "fish"] + VERT,
     [("n01440764", "tench"), ("n01443537", "goldfish")]),
    (["salmonid", "bony fish", "fish"] + VERT,
     [("n02536864", "coho")]),
    (["scorpaenid", "bony fish", "fish"] + VERT,
     [("n02643566", "lionfish")]),
    (["beetle", "insect", "arthropod"] + INVERT,
     [("n02165456", "ladybug"), ("n02172182", "dung_beetle"),
      ("n02174001", "rhinoceros_beetle"), ("n02177972", "weevil")]),
    (["butterfly", "insect", "arthropod"] + INVERT,
     [("n02279972", "monarch"), ("n02280649", "cabbage_butterfly"),
      ("n02276258", "admiral")]),
    (["orthopteron", "insect", "arthropod"] + INVERT,
     [("n02226429", "grasshopper"), ("n02229544", "cricket")]),
    (["dictyopterous insect", "insect", "arthropod"] + INVERT,
     [("n02233338", "cockroach"), ("n02236044", "mantis")]),
    (["hymenopterous insect", "insect", "arthropod"] + INVERT,
     [("n02219486", "ant"), ("n02206856", "bee")]),
    (["odonate", "insect", "arthropod"] + INVERT,
     [("n02268443", "dragonfly")]),
    (["spider", "arachnid", "arthropod"] + INVERT,
     [("n01774750", "tarantula"), ("n01773797", "garden_spider")]),
    (["agaric", "fungus", "organism", "entity"],
     [("n12998815", "agaric")]),
    (["fungus", "organism", "entity"],
     [("n12985857", "coral_fungus"), ("n13037406", "gyromitra"),
      ("n13040303", "stinkhorn"), ("n13044778", "earthstar"),
      ("n13052670", "hen-of-the-woods"), ("n13054560", "bolete")]),
    (["apple", "edible fruit", "fruit", "produce", "food", "entity"],
     [("n07742313", "Granny_Smith")]),
    (["citrus", "edible fruit", "fruit", "produce", "food", "entity"],
     [("n07747607", "orange"), ("n07749582", "lemon")]),
    (["edible fruit", "fruit", "produce", "food", "entity"],
     [("n07745940", "strawberry"), ("n07753275", "pineapple"),
      ("n07753592", "banana"), ("n07768694", "pomegranate"),
      ("n07760859", "custard_apple")]),
    (["dish", "nutriment", "food", "entity"],
     [("n07873807", "pizza"), ("n07880968", "burrito"),
      ("n07875152", "potpie"), ("n07871810", "meat_loaf")]),
    (["bread", "starches", "baked goods", "food", "entity"],
     [("n07684084", "French_loaf"), ("n07693725", "bagel"),
      ("n07695742", "pretzel")]),
    (["frozen dessert", "dessert", "food", "entity"],
     [("n07614500", "ice_cream"), ("n07615774", "ice_lolly")]),
    (["car", "motor vehicle", "self-propelled vehicle", "wheeled vehicle",
      "vehicle", "conveyance"] + ARTIFACT,
     [("n04285008", "sports_car"), ("n03100240", "convertible"),
      ("n03594945", "jeep"), ("n03770679", "minivan"),
      ("n03670208", "limousine"), ("n02930766", "cab"),
      ("n02814533", "beach_wagon")]),
    (["truck", "motor vehicle", "self-propelled vehicle", "wheeled vehicle",
      "vehicle", "conveyance"] + ARTIFACT,
     [("n03930630", "pickup"), ("n04467665", "trailer_truck"),
      ("n03417042", "garbage_truck"), ("n03345487", "fire_engine")]),
    (["bicycle", "wheeled vehicle", "vehicle", "conveyance"] + ARTIFACT,
     [("n02835271", "bicycle-built-for-two"), ("n03792782", "mountain_bike")]),
    (["airplane", "heavier-than-air craft", "aircraft", "craft", "vehicle",
      "conveyance"] + ARTIFACT,
     [("n02690373", "airliner"), ("n04552348", "warplane")]),
    (["boat", "vessel", "craft", "vehicle", "conveyance"] + ARTIFACT,
     [("n02951358", "canoe"), ("n04273569", "speedboat"),
      ("n03447447", "gondola"), ("n03344393", "fireboat"),
      ("n03662601", "lifeboat")]),
    (["implement"] + ARTIFACT,
     [("n03874293", "paddle")]),
    (["personal computer", "computer", "machine", "device"] + ARTIFACT,
     [("n03642806", "laptop"), ("n03832673", "notebook"),
      ("n03180011", "desktop_computer"), ("n03485407", "hand-held_computer")]),
    (["keyboard", "device"] + ARTIFACT,
     [("n03085013", "computer_keyboard"), ("n04505470", "typewriter_keyboard")]),
    (["clock", "timepiece", "measuring instrument", "device"] + ARTIFACT,
     [("n02708093", "analog_clock"), ("n03196217", "digital_clock"),
      ("n04548280", "wall_clock")]),
    (["oven", "kitchen appliance", "home appliance", "appliance", "device"] + ARTIFACT,
     [("n03259280", "Dutch_oven"), ("n04111531", "rotisserie")]),
    (["knife", "edge tool", "tool", "implement"] + ARTIFACT,
     [("n03041632", "cleaver"), ("n03658185", "letter_opener")]),
    (["bottle", "vessel (container)", "container"] + ARTIFACT,
     [("n02823428", "beer_bottle"), ("n03937543", "pill_bottle"),
      ("n03983396", "pop_bottle"), ("n04591713", "wine_bottle")]),
    (["chair", "seat", "furniture", "furnishing"] + ARTIFACT,
     [("n03376595", "folding_chair"), ("n04099969", "rocking_chair"),
      ("n02791124", "barber_chair"), ("n04429376", "throne")]),
    (["table", "furniture", "furnishing"] + ARTIFACT,
     [("n03201208", "dining_table")]),
    (["bench", "seat", "furniture", "furnishing"] + ARTIFACT,
     [("n03891251", "park_bench")]),
    (["bed", "furniture", "furnishing"] + ARTIFACT,
     [("n03388549", "four-poster"), ("n03125729", "cradle")]),
    (["cabinet", "furniture", "furnishing"] + ARTIFACT,
     [("n03018349", "china_cabinet"), ("n03742115", "medicine_chest")]),
    (["building", "structure"] + ARTIFACT,
     [("n02793495", "barn"), ("n03028079", "church"),
      ("n03781244", "monastery"), ("n02859443", "boathouse"),
      ("n03956157", "planetarium")]),
    (["memorial", "structure"] + ARTIFACT,
     [("n03837869", "obelisk"), ("n03743016", "megalith")]),
    (["bridge", "structure"] + ARTIFACT,
     [("n04366367", "suspension_bridge")]),
    (["dwelling", "housing", "structure"] + ARTIFACT,
     [("n03042490", "cliff_dwelling")]),
    (["keyboard instrument", "musical instrument", "device"] + ARTIFACT,
     [("n03452741", "grand_piano"), ("n02672831", "accordion")]),
    (["stringed instrument", "musical instrument", "device"] + ARTIFACT,
     [("n02787622", "banjo"), ("n02992211", "cello"),
      ("n04536866", "violin"), ("n03272010", "electric_guitar")]),
    (["wind instrument", "musical instrument", "device"] + ARTIFACT,
     [("n03372029", "flute"), ("n03838899", "oboe"),
      ("n04141076", "sax")]),
    (["percussion instrument", "musical instrument", "device"] + ARTIFACT,
     [("n03249569", "drum"), ("n03721384", "marimba")]),
    (["garment", "clothing", "covering"] + ARTIFACT,
     [("n03617480", "kimono"), ("n03595614", "jersey"),
      ("n02963159", "cardigan"), ("n04370456", "sweatshirt"),
      ("n03763968", "military_uniform")]),
]

# Dataset specs: super-class names matched against hypernym chains.
DATASETS = {
    "mixed_10": ["dog", "bird", "insect", "monkey", "car", "feline", "truck",
                 "fruit", "fungus", "boat"],
    "mixed_13": ["dog", "bird", "insect", "monkey", "car", "feline", "truck",
                 "fruit", "fungus", "boat", "furniture", "fish", "computer"],
    "living_9": ["dog", "bird", "arthropod", "reptile", "primate", "fish",
                 "feline", "bovid", "amphibian"],
    "big_12": ["dog", "bird", "insect", "reptile", "fish", "primate",
               "structure", "wheeled vehicle", "musical instrument",
               "furniture", "food", "clothing"],
    "geirhos_16": ["airplane", "bear", "bicycle", "bird", "boat", "bottle",
                   "car", "cat", "chair", "clock", "dog", "elephant",
                   "keyboard", "knife", "oven", "truck"],
}


def build() -> dict:
    classes = []
    next_id = 0
    for chain, members in GROUPS:
        for wnid, lemma in members:
            classes.append({
                "id": next_id,
                "synset": wnid,
                "lemma": lemma,
                "hypernyms": list(chain),
            })
            next_id += 1

    datasets = {}
    for name, categories in DATASETS.items():
        supers = {}
        for category in categories:
            members = sorted(
                c["id"] for c in classes
                if category in c["hypernyms"] or c["lemma"].lower() == category
            )
            supers[category] = members
        datasets[name] = supers
        claimed = [cid for ms in supers.values() for cid in ms]
        assert len(claimed) == len(set(claimed)), f"{name}: overlapping super-classes"
    return {"classes": classes, "datasets": datasets}


def main():
    doc = build()
    taxonomy_from_dict(doc)  # full validation before writing
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n",
                   encoding="utf-8")
    n_classes = len(doc["classes"])
    print(f"wrote {OUT} ({n_classes} classes, {len(doc['datasets'])} datasets)")


if __name__ == "__main__":
    main()
