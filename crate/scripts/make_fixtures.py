#!/usr/bin/env python3
"""Regenerates the files under fixtures/.

    python3 scripts/make_fixtures.py

Outputs are deterministic (fixed numpy seed), so re-running produces
byte-identical files.
"""
import json
import os
import re

import numpy as np

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "fixtures")

COCO_CATEGORIES = [
    (1, "person", "person"), (2, "bicycle", "vehicle"), (3, "car", "vehicle"),
    (4, "motorcycle", "vehicle"), (5, "airplane", "vehicle"), (6, "bus", "vehicle"),
    (7, "train", "vehicle"), (8, "truck", "vehicle"), (9, "boat", "vehicle"),
    (10, "traffic light", "outdoor"), (11, "fire hydrant", "outdoor"),
    (13, "stop sign", "outdoor"), (14, "parking meter", "outdoor"), (15, "bench", "outdoor"),
    (16, "bird", "animal"), (17, "cat", "animal"), (18, "dog", "animal"),
    (19, "horse", "animal"), (20, "sheep", "animal"), (21, "cow", "animal"),
    (22, "elephant", "animal"), (23, "bear", "animal"), (24, "zebra", "animal"),
    (25, "giraffe", "animal"), (27, "backpack", "accessory"), (28, "umbrella", "accessory"),
    (31, "handbag", "accessory"), (32, "tie", "accessory"), (33, "suitcase", "accessory"),
    (34, "frisbee", "sports"), (35, "skis", "sports"), (36, "snowboard", "sports"),
    (37, "sports ball", "sports"), (38, "kite", "sports"), (39, "baseball bat", "sports"),
    (40, "baseball glove", "sports"), (41, "skateboard", "sports"), (42, "surfboard", "sports"),
    (43, "tennis racket", "sports"), (44, "bottle", "kitchen"), (46, "wine glass", "kitchen"),
    (47, "cup", "kitchen"), (48, "fork", "kitchen"), (49, "knife", "kitchen"),
    (50, "spoon", "kitchen"), (51, "bowl", "kitchen"), (52, "banana", "food"),
    (53, "apple", "food"), (54, "sandwich", "food"), (55, "orange", "food"),
    (56, "broccoli", "food"), (57, "carrot", "food"), (58, "hot dog", "food"),
    (59, "pizza", "food"), (60, "donut", "food"), (61, "cake", "food"),
    (62, "chair", "furniture"), (63, "couch", "furniture"), (64, "potted plant", "furniture"),
    (65, "bed", "furniture"), (67, "dining table", "furniture"), (70, "toilet", "furniture"),
    (72, "tv", "electronic"), (73, "laptop", "electronic"), (74, "mouse", "electronic"),
    (75, "remote", "electronic"), (76, "keyboard", "electronic"), (77, "cell phone", "electronic"),
    (78, "microwave", "appliance"), (79, "oven", "appliance"), (80, "toaster", "appliance"),
    (81, "sink", "appliance"), (82, "refrigerator", "appliance"), (84, "book", "indoor"),
    (85, "clock", "indoor"), (86, "vase", "indoor"), (87, "scissors", "indoor"),
    (88, "teddy bear", "indoor"), (89, "hair drier", "indoor"), (90, "toothbrush", "indoor"),
]

# (labels, captions) per image.
IMAGES = [
    (["person", "couch"], [
        "A woman sitting on a couch.",
        "A woman relaxing on a sofa in the living room.",
        "A lady sits on the couch reading a magazine.",
        "A young woman resting on a brown couch.",
        "A woman seated on a couch with pillows.",
    ]),
    (["dog", "frisbee"], [
        "A dog catching a frisbee in the park.",
        "A brown dog jumps for a frisbee.",
        "A puppy playing with a frisbee on the grass.",
        "The dog leaps to catch the flying frisbee.",
        "A dog running after a frisbee.",
    ]),
    (["cat", "bed"], [
        "A cat sleeping on a bed.",
        "A kitten curled up on the blanket of a bed.",
        "A gray cat lying on a white bed.",
        "The cat is napping on the bed.",
    ]),
    (["person", "horse"], [
        "A man riding a horse on the beach.",
        "A person on horseback near the ocean.",
        "A rider and his horse walking along the shore.",
        "A man rides a brown horse by the water.",
        "A horse carrying a man across the sand.",
    ]),
    (["car", "traffic light"], [
        "A car stopped at a traffic light.",
        "A red car waiting at an intersection with a traffic light.",
        "Cars lined up under a green light.",
        "A traffic light above a busy street full of cars.",
    ]),
    (["bus", "person"], [
        "People waiting to board a bus.",
        "A city bus parked at the stop while passengers wait.",
        "A crowd of people standing next to a large bus.",
        "A man walks toward a blue bus.",
        "Passengers getting on a public bus.",
    ]),
    (["pizza", "dining table"], [
        "A pizza on a dining table.",
        "A large pizza sitting on a wooden table.",
        "A cheese pizza served on a table in a restaurant.",
        "Slices of pizza on a plate on the table.",
    ]),
    (["elephant"], [
        "An elephant walking through tall grass.",
        "A large elephant standing in a field.",
        "An elephant in the wild near some trees.",
        "A gray elephant grazing on the savanna.",
    ]),
    (["giraffe", "zebra"], [
        "A giraffe and a zebra standing in a field.",
        "A zebra grazing beside a tall giraffe.",
        "Giraffes and zebras together on the plains.",
        "A giraffe looking over a zebra in the zoo.",
        "A zebra walks past a giraffe near a tree.",
    ]),
    (["person", "surfboard"], [
        "A man riding a surfboard on a wave.",
        "A surfer catching a big wave.",
        "A person carrying a surfboard on the beach.",
        "A young man surfing in the ocean.",
    ]),
    (["bicycle", "person"], [
        "A boy riding a bicycle down the street.",
        "A man on a bike in the city.",
        "A person pedaling a bicycle along a path.",
        "A girl rides her bicycle through the park.",
        "A cyclist riding a bicycle on the road.",
    ]),
    (["airplane"], [
        "A large airplane flying in the sky.",
        "A jet plane taking off from the runway.",
        "An airplane parked at the airport.",
        "A white airplane soaring above the clouds.",
    ]),
    (["sheep", "dog"], [
        "A dog herding sheep in a field.",
        "A sheep dog watching over a flock.",
        "Sheep grazing while a dog stands nearby.",
        "A black dog chasing sheep on a hill.",
        "A flock of sheep and a dog in the grass.",
    ]),
    (["cow"], [
        "Cows grazing in a green pasture.",
        "A brown cow standing in a field.",
        "A cow lying in the grass near a fence.",
        "A herd of cows on the farm.",
    ]),
    (["laptop", "cup"], [
        "A laptop next to a coffee cup on a desk.",
        "An open laptop and a mug on the table.",
        "A cup of coffee beside a computer.",
        "A laptop computer on a desk with a cup.",
        "A person's desk with a laptop and a cup of tea.",
    ]),
    (["banana", "apple", "bowl"], [
        "A bowl filled with bananas and apples.",
        "Apples and a banana in a wooden bowl.",
        "A fruit bowl holding bananas and red apples.",
        "A bowl of fresh fruit on the counter.",
    ]),
    (["train"], [
        "A train traveling down the tracks.",
        "A passenger train arriving at the station.",
        "A long freight train crossing a bridge.",
        "An old train on the railroad.",
        "A red train pulling into the platform.",
    ]),
    (["person", "umbrella"], [
        "A woman holding an umbrella in the rain.",
        "A man walking with a black umbrella.",
        "A person under an umbrella on a rainy street.",
        "A girl with a pink umbrella.",
    ]),
    (["bird", "bench"], [
        "A bird perched on a wooden bench.",
        "A small bird sitting on a park bench.",
        "A pigeon standing on the bench.",
        "A bird resting on the back of a bench.",
        "A bench with a bird on it.",
    ]),
    (["boat", "person"], [
        "A man rowing a boat on the lake.",
        "A person sitting in a small boat.",
        "A fisherman in a boat on the river.",
        "Two people paddling a canoe on the water.",
    ]),
]

# Caption words that are surface forms of a category.
SYNONYMS = {
    "woman": ("person", 0.35), "man": ("person", 0.35), "lady": ("person", 0.45),
    "boy": ("person", 0.45), "girl": ("person", 0.4), "people": ("person", 0.4),
    "men": ("person", 0.45), "women": ("person", 0.45), "child": ("person", 0.45),
    "surfer": ("person", 0.55), "rider": ("person", 0.55), "cyclist": ("person", 0.55),
    "passengers": ("person", 0.6), "fisherman": ("person", 0.6), "crowd": ("person", 0.7),
    "person's": ("person", 0.4),
    "sofa": ("couch", 0.35), "puppy": ("dog", 0.4), "kitten": ("cat", 0.4),
    "horseback": ("horse", 0.6), "cars": ("car", 0.3), "bike": ("bicycle", 0.4),
    "plane": ("airplane", 0.4), "jet": ("airplane", 0.55), "giraffes": ("giraffe", 0.3),
    "zebras": ("zebra", 0.3), "cows": ("cow", 0.3), "herd": ("cow", 0.8),
    "mug": ("cup", 0.45), "coffee": ("cup", 0.7), "tea": ("cup", 0.75),
    "computer": ("laptop", 0.5), "bananas": ("banana", 0.3), "apples": ("apple", 0.3),
    "canoe": ("boat", 0.5), "pigeon": ("bird", 0.5), "flock": ("sheep", 0.8),
    "table": ("dining table", 0.2), "dining": ("dining table", 0.3),
    "traffic": ("traffic light", 0.3), "light": ("traffic light", 0.3),
    "slices": ("pizza", 0.9), "cheese": ("pizza", 0.85),
}

CONTEXT = {
    "scene": "park grass field beach ocean shore water sand street city road path sky runway airport "
             "clouds station bridge railroad platform tracks lake river hill pasture farm fence zoo plains "
             "savanna wild trees tree rain rainy counter desk room living restaurant intersection "
             "mountains sea day night foggy wave".split(),
    "action": "sitting relaxing sits reading resting seated catching jumps playing running after sleeping "
              "curled lying napping riding rides walking carrying stopped waiting lined board parked wait "
              "standing walks getting served grazing looking flying taking off soaring traveling arriving "
              "crossing pulling holding perched herding watching stands chasing filled rowing paddling "
              "surfing pedaling catch surfing".split(),
    "attribute": "young brown gray white red green blue black pink small large big tall long old wooden "
                 "fresh open busy public cheese".split(),
    "style": "cartoon grainy image black-and-white photo".split(),
}

# Left out on purpose so captions contain out-of-vocabulary tokens.
OOV = {"leaps", "magazine", "pillows", "blanket", "freight", "fruit"}


def tokenize(text):
    out = []
    for raw in text.split():
        tok = raw.strip("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~").lower()
        if tok:
            out.append(tok)
    return out


def unit(v):
    return v / np.linalg.norm(v)


def main():
    rng = np.random.default_rng(20230517)
    dim = 50
    supers = sorted({s for _, _, s in COCO_CATEGORIES})
    super_dir = {s: unit(rng.standard_normal(dim)) for s in supers}
    cat_dir = {}
    for _, name, _ in COCO_CATEGORIES:
        cat_dir[name] = unit(rng.standard_normal(dim))
    ctx_dir = {k: unit(rng.standard_normal(dim)) for k in CONTEXT}
    super_of = {name: s for _, name, s in COCO_CATEGORIES}

    vectors = {}

    def category_vector(name, noise):
        v = 0.55 * super_dir[super_of[name]] + 0.75 * cat_dir[name] + noise * unit(rng.standard_normal(dim))
        return v

    # Category name tokens. A token shared by several names ("dog" in "hot dog")
    # belongs to the single-word category when one exists.
    single = {name for _, name, _ in COCO_CATEGORIES if " " not in name}
    for _, name, _ in COCO_CATEGORIES:
        for tok in name.split():
            if tok in vectors:
                continue
            owner = tok if tok in single else name
            vectors[tok] = category_vector(owner, 0.2)
    for word, (cat, noise) in SYNONYMS.items():
        vectors[word] = category_vector(cat, noise)
    for kind, words in CONTEXT.items():
        for w in words:
            if w not in vectors:
                vectors[w] = 0.6 * ctx_dir[kind] + 0.8 * unit(rng.standard_normal(dim))

    corpus_tokens = set()
    for _, caps in IMAGES:
        for c in caps:
            corpus_tokens.update(tokenize(c))
    prefix_suffix = ["A cartoon of", "A grainy image of", "A black and white image of",
                     "on a rainy day", "on a foggy night", "in the mountains", "near the sea"]
    for p in prefix_suffix:
        corpus_tokens.update(tokenize(p))
    for w in sorted(corpus_tokens):
        if w in vectors or w in OOV:
            continue
        vectors[w] = 0.3 * unit(rng.standard_normal(dim))

    with open(os.path.join(ROOT, "vectors50.txt"), "w") as f:
        for w in sorted(vectors):
            f.write(w + " " + " ".join(f"{x:.6f}" for x in vectors[w]) + "\n")

    categories = [{"id": i, "name": n, "supercategory": s} for i, n, s in COCO_CATEGORIES]
    with open(os.path.join(ROOT, "coco_categories.json"), "w") as f:
        json.dump({"categories": categories}, f, indent=2)
        f.write("\n")

    by_name = {n: i for i, n, _ in COCO_CATEGORIES}
    images, annotations = [], []
    cap_id, lab_id = 1, 1
    for idx, (labels, caps) in enumerate(IMAGES):
        image_id = 1000 + 7 * idx
        images.append({
            "id": image_id,
            "file_name": f"COCO_fixture_{image_id:012d}.jpg",
            "width": 640,
            "height": 480 if idx % 3 else 427,
            "license": 1 + idx % 3,
            "coco_url": f"http://images.example.org/fixture/{image_id:012d}.jpg",
        })
        for c in caps:
            annotations.append({"id": cap_id, "image_id": image_id, "caption": c})
            cap_id += 1
        for lab in labels:
            annotations.append({
                "id": 5000 + lab_id,
                "image_id": image_id,
                "category_id": by_name[lab],
                "iscrowd": 0,
                "bbox": [10.5, 20.25, 100.0, 80.125],
                "area": 8012.5,
            })
            lab_id += 1
    doc = {
        "info": {"description": "semaug fixture corpus", "version": "1.0", "year": 2023},
        "licenses": [{"id": i, "name": f"license {i}", "url": f"http://example.org/l/{i}"} for i in (1, 2, 3)],
        "images": images,
        "annotations": annotations,
        "categories": categories,
    }
    with open(os.path.join(ROOT, "fixture_coco20.json"), "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
