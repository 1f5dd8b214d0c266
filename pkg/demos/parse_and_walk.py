"""Parse a MiniLang function and look at everything the tree gives us.

Walks one small program through the front end: the node table, the
bracketed traversal string, identifier subtokens with their leaf
alignment, and the JSON interchange round trip.
"""

import json

from scriptsum import (
    ast_from_json,
    ast_to_json,
    leaf_tokens,
    parse_minilang,
    sbt_sequence,
    split_identifier,
)

SOURCE = """\
function sumPositive(values, count) {
  total = 0;
  i = 0;
  while (i < count) {
    if (values > 0) {
      total = total + values;
    }
    i = i + 1;
  }
  return total;
}
"""

ast = parse_minilang(SOURCE)
print(f"parsed {len(ast.nodes)} nodes\n")

print("id  parent-of          type                 value")
for node in ast.nodes:
    kids = ",".join(str(c) for c in node.children) or "-"
    print(f"{node.id:>2}  {kids:<16}   {node.node_type:<20} {node.value or ''}")

# the bracketed traversal linearizes the tree; four entries per node
sbt = sbt_sequence(ast)
print(f"\nbracketed traversal ({len(sbt)} symbols = 4 x nodes):")
print(" ".join(sbt[:24]), "...")

# identifiers split into lowercased subtokens; each keeps its leaf id
tokens, align = leaf_tokens(ast)
print(f"\n{len(tokens)} model tokens:")
for i, tok in enumerate(tokens):
    print(f"  token {i:>2} {tok:<10} <- leaf node {align[i]}")

print("\nsubtoken splitter on its own:")
for name in ("sumPositive", "http_response_code", "parseHTTPResponse", "base64Encode"):
    print(f"  {name:<22} -> {split_identifier(name)}")

# serialize, reload, confirm the tree is unchanged
payload = ast_to_json(ast)
again = ast_from_json(json.loads(json.dumps(payload)))
assert [n.node_type for n in again.nodes] == [n.node_type for n in ast.nodes]
print(f"\ninterchange round trip ok ({len(payload['nodes'])} node records)")
