"""Writes the toy fixture's text embeddings.

Entities are one-hot in 12 dimensions, so a mention vector's component j is
its score against entity j. Each mention lists all 12 entities in the order
retrieval must return them; the entity at rank r gets score (13 - r) * 0.05.
"""

RANKINGS = {
    1: "E01 E02 E10 E05 E11 E03 E06 E04 E07 E08 E09 E12",  # gold E01 at rank 1
    2: "E01 E02 E10 E11 E05 E03 E06 E04 E07 E08 E09 E12",  # gold E02 at rank 2
    3: "E03 E04 E05 E06 E01 E07 E02 E08 E09 E10 E11 E12",  # gold E03 at rank 1
    4: "E04 E03 E05 E01 E06 E02 E07 E08 E09 E10 E11 E12",  # gold E05 at rank 3
    5: "E07 E12 E05 E03 E04 E06 E01 E02 E08 E09 E10 E11",  # gold E06 at rank 6
    6: "E07 E06 E03 E04 E05 E12 E01 E02 E08 E09 E10 E11",  # gold E07 at rank 1
    7: "E08 E10 E03 E12 E06 E11 E01 E09 E02 E04 E05 E07",  # gold E09 at rank 8 (not retrieved)
    8: "E06 E12 E10 E03 E04 E05 E01 E02 E07 E08 E09 E11",  # gold E12 at rank 2
}
ENTITIES = [f"E{i:02d}" for i in range(1, 13)]


def main():
    with open("entities.txt", "w") as f:
        for i, eid in enumerate(ENTITIES):
            row = ["1" if j == i else "0" for j in range(12)]
            f.write(f"{eid}\t{' '.join(row)}\n")
    with open("mentions.txt", "w") as f:
        for split in ("train", "test"):
            for line_no, order in RANKINGS.items():
                ranked = order.split()
                assert sorted(ranked) == ENTITIES
                score = {eid: (13 - r) * 0.05 for r, eid in enumerate(ranked, start=1)}
                row = [f"{score[eid]:.2f}" for eid in ENTITIES]
                f.write(f"{split}:{line_no}\t{' '.join(row)}\n")


if __name__ == "__main__":
    main()
