"""Load a tiny knowledge graph from TSV files, partition it into the four
attribute-typed subgraphs, and poke around with the adjacency queries.

Run: python3 demos/01_load_partition_explore.py
"""

import tempfile
from pathlib import Path

from attralign.kg import load_kg, neighbors
from attralign.partition import classify_value, entity_names, partition

work = Path(tempfile.mkdtemp(prefix="attralign_demo_"))

# relation triples: head <TAB> relation <TAB> tail
(work / "rel.tsv").write_text(
    "Georgia_(U.S._state)\tcountry\tUnited_States\n"
    "Atlanta\tcapitalOf\tGeorgia_(U.S._state)\n"
    "Savannah\tlocatedIn\tGeorgia_(U.S._state)\n",
    encoding="utf-8")

# attribute triples: entity <TAB> attribute <TAB> value
(work / "attr.tsv").write_text(
    "Georgia_(U.S._state)\tpostalabbreviation\tGA\n"
    "Georgia_(U.S._state)\ttotalarea\t154077\n"
    "Georgia_(U.S._state)\tadmittancedate\t1788\n"
    "Georgia_(U.S._state)\tmotto\tWisdom, Justice, and Moderation\n"
    "Atlanta\tpopulation\t498715\n"
    "Atlanta\tnickname\tThe Big Peach\n",
    encoding="utf-8")

kg = load_kg(work / "rel.tsv", work / "attr.tsv")
print(f"loaded {kg.n_entities} entities, {len(kg.relation_triples)} relation triples, "
      f"{len(kg.attribute_triples)} attribute triples")

georgia = kg.entity_id("Georgia_(U.S._state)")
print("neighbors of Georgia:", sorted(kg.entity_labels[e] for e in neighbors(kg, georgia)))

# every value string is either digital (parses as a number) or literal
for raw in ("154077", "GA", "1788", "154,077 km"):
    print(f"  classify_value({raw!r}) -> {classify_value(raw).value}")

# the four views share entities and relation triples; attribute triples are
# routed by kind, and names are synthesized from the entity labels by default
parts = partition(kg)
for sub in parts:
    print(f"subgraph {sub.kind:<9} attribute triples: {len(sub.attribute_triples)}")

names = entity_names(parts.name)
print("synthesized name for Georgia:", names[georgia])
