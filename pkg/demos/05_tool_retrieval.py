"""Semantic tool retrieval over the bundled catalog.

Every tool's description and example queries are embedded once (hashed
bag-of-words, 256 buckets, unit norm); a user query is embedded the same way
and ranked by squared L2 distance. Queries whose best distance exceeds the
confidence threshold are flagged as tool gaps rather than guessed at.

Also runs the 150-query annotated evaluation corpus and prints per-category
top-1 accuracy, the same numbers `planchat eval-retriever` reports.
"""

from planchat import load_catalog
from planchat.retriever import (
    CONFIDENCE_THRESHOLD,
    HashedBagEmbedder,
    evaluate_retrieval,
    index_catalog,
    load_annotated_set,
    retrieve,
)
from planchat.resources import bundled_annotated_set, bundled_catalog_dir

QUERIES = [
    "Show me the operations plan",
    "How would receiving 100 kg of natural rubber on 2024-04-17 impact my plan?",
    "Why is order O1 late?",
    "I want to only use the plant in Vancouver",
    "How many more tires are produced in the new plan?",
    "qqq zzz xxx",
]


def main() -> None:
    catalog = load_catalog(bundled_catalog_dir())
    embedder = HashedBagEmbedder()
    index = index_catalog(catalog, embedder)
    print(f"indexed {len(catalog)} tools at dimension {index.dimension}, "
          f"confidence threshold {CONFIDENCE_THRESHOLD}\n")

    for query in QUERIES:
        result = retrieve(query, index, k=3, embedder=embedder)
        marker = "ok " if result.confident else "GAP"
        ranked = ", ".join(f"{tool}:{distance:.3f}" for tool, distance in result.ranked)
        print(f"[{marker}] {query!r}\n      {ranked}")

    rows = load_annotated_set(bundled_annotated_set())
    report = evaluate_retrieval(rows, index, embedder, catalog.categories())
    print(f"\nannotated corpus: {report.correct}/{report.total} top-1 "
          f"({report.accuracy:.1%})")
    for category, (correct, total) in report.per_category.items():
        print(f"  {category:14s} {correct:3d}/{total:3d} ({correct / total:.1%})")


if __name__ == "__main__":
    main()
