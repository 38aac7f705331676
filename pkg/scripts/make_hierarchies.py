"""Write the bundled hierarchy files under data/.

cifar100.tsv        the CIFAR-100 superclass -> class taxonomy (100 leaves, 20 superclasses)
fgvc_shaped.tsv     manufacturer -> family -> variant, 30 / 70 / 102 nodes, unbalanced
fgvc_shaped_dag.tsv the same with a few families shared by two manufacturers
nabirds_shaped.tsv  order -> [family ->] species -> variant, leaves at depth 3 or 4,
                    555 leaves and 1011 non-root nodes

Usage: python scripts/make_hierarchies.py [OUT_DIR]
"""

import sys
from pathlib import Path

CIFAR100 = {
    "aquatic_mammals": "beaver dolphin otter seal whale",
    "fish": "aquarium_fish flatfish ray shark trout",
    "flowers": "orchid poppy rose sunflower tulip",
    "food_containers": "bottle bowl can cup plate",
    "fruit_and_vegetables": "apple mushroom orange pear sweet_pepper",
    "household_electrical_devices": "clock keyboard lamp telephone television",
    "household_furniture": "bed chair couch table wardrobe",
    "insects": "bee beetle butterfly caterpillar cockroach",
    "large_carnivores": "bear leopard lion tiger wolf",
    "large_man-made_outdoor_things": "bridge castle house road skyscraper",
    "large_natural_outdoor_scenes": "cloud forest mountain plain sea",
    "large_omnivores_and_herbivores": "camel cattle chimpanzee elephant kangaroo",
    "medium_mammals": "fox porcupine possum raccoon skunk",
    "non-insect_invertebrates": "crab lobster snail spider worm",
    "people": "baby boy girl man woman",
    "reptiles": "crocodile dinosaur lizard snake turtle",
    "small_mammals": "hamster mouse rabbit shrew squirrel",
    "trees": "maple_tree oak_tree palm_tree pine_tree willow_tree",
    "vehicles_1": "bicycle bus motorcycle pickup_truck train",
    "vehicles_2": "lawn_mower rocket streetcar tank tractor",
}


def spread(total, bins, skew):
    """Deal ``total`` items into ``bins`` (each >= 1), front-loading by ``skew``."""
    counts = [1] * bins
    extra = total - bins
    weights = [skew ** -(i % 7) for i in range(bins)]
    scale = extra / sum(weights)
    for i in range(bins):
        counts[i] += int(weights[i] * scale)
    i = 0
    while sum(counts) < total:
        counts[i % bins] += 1
        i += 1
    return counts


def cifar():
    return [("root", sup) for sup in CIFAR100] + [
        (sup, leaf) for sup, leaves in CIFAR100.items() for leaf in leaves.split()
    ]


def fgvc():
    edges = []
    fams = spread(70, 30, 1.4)
    families = []
    for m, nf in enumerate(fams, 1):
        man = f"M{m:02d}"
        edges.append(("root", man))
        for f in range(1, nf + 1):
            fam = f"{man}-F{f}"
            edges.append((man, fam))
            families.append(fam)
    for fam, nv in zip(families, spread(102, 70, 1.2)):
        for v in range(1, nv + 1):
            edges.append((fam, f"{fam}-V{v}"))
    return edges


def fgvc_dag():
    edges = fgvc()
    # a handful of families co-owned by a second manufacturer
    extra = [("M02", "M01-F1"), ("M05", "M03-F1"), ("M10", "M04-F2"), ("M20", "M11-F1")]
    return edges + extra


def nabirds():
    edges = []
    orders = [f"O{i:02d}" for i in range(1, 21)]
    passer = "O00_Passeriformes"
    edges += [("root", o) for o in orders + [passer]]
    families = [f"{passer}.F{i:02d}" for i in range(1, 31)]
    edges += [(passer, f) for f in families]
    # 405 species: 260 passerine (64%), 145 elsewhere
    species = []
    for fam, ns in zip(families, spread(260, 30, 1.3)):
        species += [f"{fam}.S{k:02d}" for k in range(1, ns + 1)]
        edges += [(fam, f"{fam}.S{k:02d}") for k in range(1, ns + 1)]
    for order, ns in zip(orders, spread(145, 20, 1.3)):
        species += [f"{order}.S{k:02d}" for k in range(1, ns + 1)]
        edges += [(order, f"{order}.S{k:02d}") for k in range(1, ns + 1)]
    # 555 leaves: every third species has two variants until the quota is met
    variants = [1] * len(species)
    i = 0
    while sum(variants) < 555:
        variants[i] += 1
        i += 3 if i + 3 < len(species) else -i + 1
    for sp, nv in zip(species, variants):
        edges += [(sp, f"{sp}.V{v}") for v in range(1, nv + 1)]
    return edges


def write(path, edges, header):
    lines = [f"# {header}"] + [f"{p}\t{c}" for p, c in edges]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data"
    out.mkdir(parents=True, exist_ok=True)
    write(out / "cifar100.tsv", cifar(), "CIFAR-100: superclass -> class")
    write(out / "fgvc_shaped.tsv", fgvc(), "FGVC-shaped: manufacturer -> family -> variant (synthetic names)")
    write(out / "fgvc_shaped_dag.tsv", fgvc_dag(), "FGVC-shaped DAG: some families have two manufacturers")
    write(out / "nabirds_shaped.tsv", nabirds(), "NABirds-shaped: order -> [family ->] species -> variant")
    print(f"wrote hierarchies to {out}")
