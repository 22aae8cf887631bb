"""Regenerates the synthetic toy corpora used by the tests.

toy.zh / toy.en        100 short pairs (<= 8 tokens per side) for training runs.
filter.zh / filter.en  100 pairs, 7 of which have a side longer than 50 tokens.
"""
import random

SUBJECTS = [
    ("我", "i", False), ("你", "you", False), ("他", "he", True), ("她", "she", True),
    ("我们", "we", False), ("妈妈", "mother", True), ("姐姐", "sister", True),
    ("朋友", "the friend", True), ("猫", "the cat", True), ("狗", "the dog", True),
    ("学生", "the student", True), ("男人", "the man", True), ("女人", "the woman", True),
]
VERBS = [
    ("喝", "drink"), ("吃", "eat"), ("看", "see"), ("爱", "love"), ("想", "want"), ("打", "hit"),
]
OBJECTS = [
    ("茶", "tea"), ("水", "water"), ("药", "medicine"), ("草", "grass"), ("花", "flowers"),
    ("森林", "the forest"), ("树", "the tree"), ("桥", "the bridge"), ("河", "the river"),
    ("海", "the sea"), ("湖", "the lake"), ("山", "the mountain"), ("石头", "the stone"),
    ("月亮", "the moon"), ("村子", "the village"), ("家", "home"),
]
ADJS = [("大", "big"), ("小", "small"), ("好", "good")]


def verb(v, third):
    return v + "s" if third else v


def sentence(rng):
    kind = rng.randrange(4)
    zs, es, third = rng.choice(SUBJECTS)
    if kind == 0:
        zv, ev = rng.choice(VERBS)
        zo, eo = rng.choice(OBJECTS)
        return [zs, zv, zo], f"{es} {verb(ev, third)} {eo}".split()
    if kind == 1:
        za, ea = rng.choice(ADJS)
        cop = "am" if es == "i" else ("is" if third else "are")
        return [zs, "很", za], f"{es} {cop} very {ea}".split()
    if kind == 2:
        za, ea = rng.choice(ADJS)
        zo, eo = rng.choice(OBJECTS)
        eo = eo.replace("the ", "")
        return [zs, "有", za, "的", zo], f"{es} {verb('have', third) if not third else 'has'} {ea} {eo}".split()
    zv, ev = rng.choice(VERBS)
    zo, eo = rng.choice(OBJECTS)
    return ["明天", zs, zv, zo], f"tomorrow {es} {verb(ev, third)} {eo}".split()


def unique_pairs(rng, n):
    seen, out = set(), []
    while len(out) < n:
        src, tgt = sentence(rng)
        key = " ".join(src)
        if key in seen:
            continue
        assert len(src) <= 8 and len(tgt) <= 8
        seen.add(key)
        out.append((src, tgt))
    return out


def write(prefix, pairs):
    with open(prefix + ".zh", "w", encoding="utf-8") as f:
        f.writelines(" ".join(s) + "\n" for s, _ in pairs)
    with open(prefix + ".en", "w", encoding="utf-8") as f:
        f.writelines(" ".join(t) + "\n" for _, t in pairs)


def main():
    rng = random.Random(20180801)
    write("toy", unique_pairs(rng, 100))

    rng = random.Random(7)
    pairs = unique_pairs(rng, 100)
    for i in (3, 17, 29, 44, 58, 71, 90):
        src, tgt = pairs[i]
        if i % 2:
            src = (src * 20)[:51 + i % 5]
        else:
            tgt = (tgt * 20)[:51 + i % 5]
        pairs[i] = (src, tgt)
    write("filter", pairs)


if __name__ == "__main__":
    main()
