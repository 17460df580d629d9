"""Dependency parses and their reshaping into aspect-word interactive graphs.

A parsed sentence arrives as a CoNLL-U tree. For a given aspect span the
tree is contracted (all aspect tokens become one super-node) and traversed
breadth-first, undirected; every context word within kappa_max hops becomes
a word node whose edge carries the composed dependency tag: the relation
labels along the shortest path plus the hop count, rendered
"dep1:dep2:...:depK:K".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence


class ParseError(ValueError):
    """Malformed CoNLL-U input or an invalid dependency tree."""


@dataclass
class DepTree:
    """One sentence's dependency parse.

    heads are 1-based (0 marks the root); rels holds the relation tag of the
    edge from each token to its head. Validation guarantees a single root and
    an acyclic, connected head relation.
    """

    tokens: list[str]
    heads: list[int]
    rels: list[str]

    def __post_init__(self):
        self.validate()

    def __len__(self) -> int:
        return len(self.tokens)

    def validate(self) -> None:
        n = len(self.tokens)
        if not (len(self.heads) == len(self.rels) == n):
            raise ParseError(
                f"tree arrays disagree: {n} tokens, {len(self.heads)} heads, {len(self.rels)} rels"
            )
        if n == 0:
            raise ParseError("empty tree")
        for i, h in enumerate(self.heads, start=1):
            if not 0 <= h <= n:
                raise ParseError(f"token {i}: head {h} outside [0, {n}]")
            if h == i:
                raise ParseError(f"token {i} is its own head")
        # Walk head chains; any revisit before reaching the root is a cycle.
        status = [0] * (n + 1)  # 0 unvisited, 1 on current path, 2 done
        status[0] = 2
        for start in range(1, n + 1):
            if status[start]:
                continue
            path = []
            node = start
            while status[node] == 0:
                status[node] = 1
                path.append(node)
                node = self.heads[node - 1]
            if status[node] == 1:
                cycle = path[path.index(node):]
                raise ParseError(f"cycle in heads through tokens {cycle}")
            for p in path:
                status[p] = 2
        roots = [i for i, h in enumerate(self.heads, start=1) if h == 0]
        if len(roots) != 1:
            raise ParseError(f"expected exactly one root, found {len(roots)}")

    def undirected_edges(self) -> list[tuple[int, int, str]]:
        """(child, head, rel) for every non-root attachment, 0-based indices."""
        out = []
        for i, (h, rel) in enumerate(zip(self.heads, self.rels)):
            if h != 0:
                out.append((i, h - 1, rel))
        return out


def parse_conllu(text: str) -> list[DepTree]:
    """Parse CoNLL-U text into validated trees.

    Comment lines start with '#'; sentences are separated by blank lines;
    multiword-token ranges ("3-4") and empty nodes ("3.1") are skipped.
    Errors carry the 1-based line number.
    """
    trees: list[DepTree] = []
    tokens: list[str] = []
    heads: list[int] = []
    rels: list[str] = []
    first_line = 0

    def flush(at_line: int):
        nonlocal tokens, heads, rels
        if not tokens:
            return
        try:
            trees.append(DepTree(tokens, heads, rels))
        except ParseError as e:
            raise ParseError(f"sentence starting at line {first_line}: {e}") from None
        tokens, heads, rels = [], [], []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip("\n")
        if not line.strip():
            flush(lineno)
            continue
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ParseError(f"line {lineno}: expected 10 tab-separated columns, got {len(cols)}")
        tok_id = cols[0]
        if "-" in tok_id or "." in tok_id:
            continue  # multiword range / empty node
        if not tokens:
            first_line = lineno
        try:
            head = int(cols[6])
        except ValueError:
            raise ParseError(f"line {lineno}: HEAD column is not an integer: {cols[6]!r}") from None
        tokens.append(cols[1])
        heads.append(head)
        rels.append(cols[7])
    flush(lineno if text else 0)
    return trees


@dataclass(frozen=True)
class ComposedTag:
    """Relation labels along the aspect-to-word path plus the hop count."""

    path: tuple[str, ...]
    hops: int

    def __post_init__(self):
        if self.hops < 1:
            raise ValueError("composed tag needs at least one hop")
        if self.hops != len(self.path):
            raise ValueError(f"hop count {self.hops} != path length {len(self.path)}")

    def render(self) -> str:
        return ":".join(self.path) + f":{self.hops}"


def compose_tag(path_tags: Sequence[str], hops: int) -> ComposedTag:
    return ComposedTag(path=tuple(path_tags), hops=hops)


@dataclass
class Awig:
    """Star graph around one contracted aspect node.

    word_nodes are (token_index, node_id) pairs ordered by token index; each
    edge links the aspect node to one word node and carries a ComposedTag.
    Aspect-source tokens never appear as word nodes.
    """

    aspect_token_ids: list[int]
    word_nodes: list[tuple[int, int]] = field(default_factory=list)
    edges: list[tuple[int, ComposedTag]] = field(default_factory=list)

    @property
    def num_words(self) -> int:
        return len(self.word_nodes)

    def to_json_dict(self, tokens: Sequence[str]) -> dict:
        return {
            "aspect_tokens": list(self.aspect_token_ids),
            "nodes": [{"token": tok, "text": tokens[tok]} for tok, _ in self.word_nodes],
            "edges": [
                {
                    "node": node_id,
                    "path": list(tag.path),
                    "hops": tag.hops,
                    "tag": tag.render(),
                }
                for node_id, tag in self.edges
            ],
        }


def build_awig(tree: DepTree, span: tuple[int, int], kappa_max: int,
               drop_punct: bool = False) -> Awig:
    """Contract the aspect span to one node and BFS outward, undirected.

    span is (start, end) inclusive, 0-based. Every token reached within
    kappa_max hops becomes a word node; its edge records the relation labels
    along the BFS shortest path (ties broken by smallest token index) and the
    hop count. Tokens further than kappa_max hops are discarded. With
    drop_punct, tree edges labelled "punct" are invisible to the traversal.
    """
    n = len(tree)
    s, e = span
    if not (0 <= s <= e < n):
        raise ValueError(f"invalid aspect span [{s}, {e}] for {n} tokens")
    if kappa_max < 1:
        raise ValueError("kappa_max must be at least 1")
    aspect = set(range(s, e + 1))

    adj: list[list[tuple[int, str]]] = [[] for _ in range(n)]
    for child, head, rel in tree.undirected_edges():
        if drop_punct and rel == "punct":
            continue
        adj[child].append((head, rel))
        adj[head].append((child, rel))
    for lst in adj:
        lst.sort()

    # BFS from the contracted super-node; aspect-internal edges vanish.
    paths: dict[int, tuple[str, ...]] = {}
    frontier = sorted(aspect)
    visited = set(aspect)
    for _ in range(kappa_max):
        nxt = []
        for u in frontier:
            base = paths.get(u, ())
            for v, rel in adj[u]:
                if v in visited:
                    continue
                visited.add(v)
                paths[v] = base + (rel,)
                nxt.append(v)
        frontier = sorted(nxt)
        if not frontier:
            break

    word_tokens = sorted(paths)
    awig = Awig(aspect_token_ids=sorted(aspect))
    for node_id, tok in enumerate(word_tokens):
        awig.word_nodes.append((tok, node_id))
        path = paths[tok]
        awig.edges.append((node_id, ComposedTag(path=path, hops=len(path))))
    return awig
