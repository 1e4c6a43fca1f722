"""Synthesis route trees: parsing, validation, canonicalization, measurement.

A route is a bipartite ordered tree. The root is the target molecule,
molecule nodes alternate with reaction nodes along every path, and leaves
are starting materials. Reaction strings are stored either forward
("reactants>agents>products") or retrosynthetic ("products>agents>reactants");
the direction is declared per corpus and normalized to forward by
:func:`canonicalize`.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence

from .errors import RouteFormatError

logger = logging.getLogger(__name__)

MOL = "mol"
REACTION = "reaction"

FORWARD = "forward"
RETRO = "retro"

CORPUS_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class RouteNode:
    """One node of a route tree, either a molecule or a reaction."""

    node_type: str
    smiles: str = ""
    reaction_smiles: str = ""
    mapped_reaction_smiles: str | None = None
    children: tuple["RouteNode", ...] = ()
    node_id: str = ""

    @property
    def is_molecule(self) -> bool:
        return self.node_type == MOL

    @property
    def is_reaction(self) -> bool:
        return self.node_type == REACTION

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class RouteTree:
    """A full route: target at the root plus provenance metadata."""

    root: RouteNode
    route_id: str = ""
    year: int | None = None
    source: str | None = None
    direction: str = FORWARD

    def walk(self) -> Iterator[RouteNode]:
        """Preorder traversal over all nodes."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def reactions(self) -> list[RouteNode]:
        return [n for n in self.walk() if n.is_reaction]

    def molecules(self) -> list[RouteNode]:
        return [n for n in self.walk() if n.is_molecule]

    def leaves(self) -> list[RouteNode]:
        return [n for n in self.walk() if n.is_molecule and n.is_leaf]


@dataclass(frozen=True)
class DepthMap:
    """node_id -> depth. The root molecule is 0 and depth increments when
    stepping from a molecule to the reaction that produces it, so the final
    synthetic step has depth 1 and the earliest steps have depth max_depth."""

    depths: dict[str, int]
    max_depth: int

    def depth(self, node_id: str) -> int:
        return self.depths[node_id]


@dataclass(frozen=True)
class RouteStats:
    step_count: int
    leaf_count: int
    max_depth: int
    is_convergent: bool
    longest_linear_sequence: int


def split_reaction(reaction_smiles: str) -> tuple[list[str], list[str], list[str]]:
    """Split "a>b>c" into (first, agents, last) component lists."""
    parts = reaction_smiles.split(">")
    if len(parts) != 3:
        raise RouteFormatError(
            f"reaction string must have three '>'-separated fields, got {reaction_smiles!r}"
        )
    return tuple([p for p in chunk.split(".") if p] for chunk in parts)  # type: ignore[return-value]


def reverse_reaction(reaction_smiles: str) -> str:
    """Swap the outer fields of a reaction string (retro <-> forward)."""
    parts = reaction_smiles.split(">")
    if len(parts) != 3:
        raise RouteFormatError(
            f"reaction string must have three '>'-separated fields, got {reaction_smiles!r}"
        )
    return ">".join((parts[2], parts[1], parts[0]))


def reactants_of(node: RouteNode) -> list[str]:
    """Reactant molecule strings of a forward-direction reaction node."""
    return split_reaction(node.reaction_smiles)[0]


def products_of(node: RouteNode) -> list[str]:
    """Product molecule strings of a forward-direction reaction node."""
    return split_reaction(node.reaction_smiles)[2]


# ---------------------------------------------------------------------------
# Parsing


def parse_route(json_text: str, route_id: str = "", direction: str = FORWARD) -> RouteTree:
    """Parse one route from JSON text and validate every tree invariant.

    Node ids are assigned deterministically by preorder index when absent.
    """
    try:
        payload = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise RouteFormatError(f"malformed JSON: {exc}") from exc
    return route_from_dict(payload, route_id=route_id, direction=direction)


def route_from_dict(payload: dict, route_id: str = "", direction: str = FORWARD) -> RouteTree:
    """Build a validated RouteTree from an already-decoded dict.

    Accepts either a bare root node or a wrapper carrying route_id / year /
    source alongside the root.
    """
    if not isinstance(payload, dict):
        raise RouteFormatError("route JSON must be an object")
    year = None
    source = None
    if "root" in payload:
        route_id = payload.get("route_id", route_id)
        year = payload.get("year")
        source = payload.get("source")
        node_payload = payload["root"]
    else:
        node_payload = payload
    if year is not None and not isinstance(year, int):
        raise RouteFormatError(f"year must be an integer, got {year!r}")
    if direction not in (FORWARD, RETRO):
        raise RouteFormatError(f"direction must be 'forward' or 'retro', got {direction!r}")

    counter = [0]
    seen_ids: set[str] = set()
    root = _node_from_dict(node_payload, "root", counter, seen_ids)
    if not root.is_molecule:
        raise RouteFormatError("root must be a molecule node", "root")
    return RouteTree(root=root, route_id=route_id, year=year, source=source, direction=direction)


def _node_from_dict(payload, path: str, counter: list[int], seen_ids: set[str]) -> RouteNode:
    if not isinstance(payload, dict):
        raise RouteFormatError("node must be a JSON object", path)
    node_type = payload.get("type")
    if node_type not in (MOL, REACTION):
        raise RouteFormatError(f"node type must be 'mol' or 'reaction', got {node_type!r}", path)

    node_id = payload.get("node_id", "")
    if not node_id:
        node_id = f"n{counter[0]}"
    if node_id in seen_ids:
        raise RouteFormatError(f"duplicate node_id {node_id!r}", path)
    seen_ids.add(node_id)
    counter[0] += 1

    metadata = payload.get("metadata") or {}
    if not isinstance(metadata, dict):
        raise RouteFormatError("metadata must be an object", path)

    raw_children = payload.get("children", [])
    if not isinstance(raw_children, list):
        raise RouteFormatError("children must be an array", path)
    children = tuple(
        _node_from_dict(child, f"{path}/{i}", counter, seen_ids)
        for i, child in enumerate(raw_children)
    )

    if node_type == MOL:
        smiles = payload.get("smiles")
        if not smiles or not isinstance(smiles, str):
            raise RouteFormatError("molecule node missing 'smiles'", path)
        for i, child in enumerate(children):
            if not child.is_reaction:
                raise RouteFormatError("type alternation violated", f"{path}/{i}")
        return RouteNode(node_type=MOL, smiles=smiles, children=children, node_id=node_id)

    rsmi = payload.get("rsmi") or metadata.get("rsmi")
    if not rsmi or not isinstance(rsmi, str):
        raise RouteFormatError("reaction node missing 'rsmi'", path)
    if rsmi.count(">") != 2:
        raise RouteFormatError(f"reaction string needs two '>' separators: {rsmi!r}", path)
    if not children:
        raise RouteFormatError("reaction node must have at least one child", path)
    for i, child in enumerate(children):
        if not child.is_molecule:
            raise RouteFormatError("type alternation violated", f"{path}/{i}")
    mapped = metadata.get("mapped_reaction_smiles")
    if mapped is not None and not isinstance(mapped, str):
        raise RouteFormatError("mapped_reaction_smiles must be a string", path)
    return RouteNode(
        node_type=REACTION,
        reaction_smiles=rsmi,
        mapped_reaction_smiles=mapped,
        children=children,
        node_id=node_id,
    )


def node_to_dict(node: RouteNode) -> dict:
    if node.is_molecule:
        out: dict = {"type": MOL, "smiles": node.smiles, "node_id": node.node_id}
    else:
        metadata = {"rsmi": node.reaction_smiles}
        if node.mapped_reaction_smiles is not None:
            metadata["mapped_reaction_smiles"] = node.mapped_reaction_smiles
        out = {"type": REACTION, "metadata": metadata, "node_id": node.node_id}
    out["children"] = [node_to_dict(child) for child in node.children]
    return out


def route_to_dict(route: RouteTree) -> dict:
    out = {"route_id": route.route_id, "root": node_to_dict(route.root)}
    if route.year is not None:
        out["year"] = route.year
    if route.source is not None:
        out["source"] = route.source
    return out


def route_to_json(route: RouteTree) -> str:
    return json.dumps(route_to_dict(route), sort_keys=True)


# ---------------------------------------------------------------------------
# Canonicalization


def canonicalize(route: RouteTree) -> RouteTree:
    """Deterministic canonical form: deepest subtrees first, forward reactions.

    Children are ordered by (subtree max-depth desc, node count desc,
    canonical serialization asc). Idempotent; only child order and the
    reaction-string direction change.
    """
    reverse = route.direction == RETRO
    root, _, _, _ = _canonical_node(route.root, reverse)
    return replace(route, root=root, direction=FORWARD)


def _canonical_node(node: RouteNode, reverse: bool) -> tuple[RouteNode, int, int, str]:
    """Returns (canonical node, subtree max reaction depth, node count, key)."""
    if node.is_reaction and reverse:
        node = replace(
            node,
            reaction_smiles=reverse_reaction(node.reaction_smiles),
            mapped_reaction_smiles=(
                reverse_reaction(node.mapped_reaction_smiles)
                if node.mapped_reaction_smiles
                else node.mapped_reaction_smiles
            ),
        )
    ranked = sorted(
        (_canonical_node(child, reverse) for child in node.children),
        key=lambda item: (-item[1], -item[2], item[3]),
    )
    children = tuple(item[0] for item in ranked)
    node = replace(node, children=children)

    child_depth = max((item[1] for item in ranked), default=0)
    depth = child_depth + 1 if node.is_reaction else child_depth
    count = 1 + sum(item[2] for item in ranked)
    label = node.smiles if node.is_molecule else node.reaction_smiles
    key = f"({node.node_type}:{label}" + "".join(item[3] for item in ranked) + ")"
    return node, depth, count, key


# ---------------------------------------------------------------------------
# Depth and topology


def depth_map(route: RouteTree) -> DepthMap:
    """Depth per node. Molecules inherit the producing reaction's depth."""
    depths: dict[str, int] = {}
    max_depth = 0

    def visit(node: RouteNode, depth: int) -> None:
        nonlocal max_depth
        depths[node.node_id] = depth
        if node.is_reaction:
            max_depth = max(max_depth, depth)
        for child in node.children:
            # depth increases when stepping off a molecule, not a reaction
            visit(child, depth + 1 if node.is_molecule else depth)

    visit(route.root, 0)
    return DepthMap(depths=depths, max_depth=max_depth)


def topology(route: RouteTree) -> RouteStats:
    """Global shape statistics for one route."""
    dm = depth_map(route)
    step_count = 0
    leaf_count = 0
    convergent = False
    for node in route.walk():
        if node.is_reaction:
            step_count += 1
            grown = [c for c in node.children if c.children]
            if len(grown) >= 2:
                convergent = True
        elif node.is_leaf:
            leaf_count += 1
    return RouteStats(
        step_count=step_count,
        leaf_count=leaf_count,
        max_depth=dm.max_depth,
        is_convergent=convergent,
        longest_linear_sequence=dm.max_depth,
    )


# ---------------------------------------------------------------------------
# Extraction from flat single-step reaction lists


def extract_routes(
    reactions: Sequence[tuple[str, dict]],
    roots: Sequence[str],
) -> list[RouteTree]:
    """Grow route trees from single-step reactions by depth-first expansion.

    Each molecule links to the reaction that produces it, recursing into the
    reactants. When several reactions produce the same molecule the earliest
    by input order wins. A molecule already on the current path is not
    revisited, which breaks cycles. Roots with no producing reaction yield a
    single-node route and a logged warning.
    """
    producers: dict[str, tuple[str, dict]] = {}
    alternates: dict[str, int] = {}
    for rsmi, metadata in reactions:
        prods = split_reaction(rsmi)[2]
        for product in prods:
            if product in producers:
                alternates[product] = alternates.get(product, 0) + 1
            else:
                producers[product] = (rsmi, metadata or {})

    routes = []
    for i, root in enumerate(roots):
        counter = [0]
        node = _expand(root, producers, frozenset(), counter)
        year = None
        source = None
        if root in producers:
            meta = producers[root][1]
            year = meta.get("year")
            source = meta.get("patent_id")
        else:
            logger.warning("root %r is not produced by any reaction", root)
        routes.append(
            RouteTree(
                root=node,
                route_id=f"route{i:05d}",
                year=year,
                source=source,
                direction=FORWARD,
            )
        )
    return routes


def _expand(
    molecule: str,
    producers: dict[str, tuple[str, dict]],
    on_path: frozenset[str],
    counter: list[int],
) -> RouteNode:
    node_id = f"n{counter[0]}"
    counter[0] += 1
    produced = producers.get(molecule)
    if produced is None or molecule in on_path:
        return RouteNode(node_type=MOL, smiles=molecule, node_id=node_id)
    rsmi, _ = produced
    path = on_path | {molecule}
    rxn_id = f"n{counter[0]}"
    counter[0] += 1
    reactant_nodes = tuple(
        _expand(reactant, producers, path, counter) for reactant in split_reaction(rsmi)[0]
    )
    reaction_node = RouteNode(
        node_type=REACTION,
        reaction_smiles=rsmi,
        children=reactant_nodes,
        node_id=rxn_id,
    )
    return RouteNode(node_type=MOL, smiles=molecule, children=(reaction_node,), node_id=node_id)


# ---------------------------------------------------------------------------
# Corpus files (newline-delimited JSON with a header record)


def write_corpus(path, routes: Iterable[RouteTree], direction: str = FORWARD) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"schema_version": CORPUS_SCHEMA_VERSION, "direction": direction}))
        fh.write("\n")
        for route in routes:
            fh.write(route_to_json(route))
            fh.write("\n")


def read_corpus(path) -> list[RouteTree]:
    routes = []
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise RouteFormatError("corpus file is empty (missing header record)")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise RouteFormatError(f"malformed corpus header: {exc}") from exc
        if header.get("schema_version") != CORPUS_SCHEMA_VERSION:
            raise RouteFormatError(
                f"unsupported corpus schema_version {header.get('schema_version')!r}"
            )
        direction = header.get("direction", FORWARD)
        if direction not in (FORWARD, RETRO):
            raise RouteFormatError(f"corpus direction must be forward|retro, got {direction!r}")
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                routes.append(parse_route(line, direction=direction))
            except RouteFormatError as exc:
                raise RouteFormatError(f"line {lineno}: {exc}") from exc
    return routes


def read_reactions_tsv(path) -> list[tuple[str, dict]]:
    """Single-step reaction file: reaction_smiles <TAB> year <TAB> patent_id."""
    reactions = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise RouteFormatError(
                    f"line {lineno}: expected 3 tab-separated columns, got {len(fields)}"
                )
            rsmi, year_text, patent_id = fields
            year = None
            if year_text:
                try:
                    year = int(year_text)
                except ValueError:
                    raise RouteFormatError(f"line {lineno}: bad year {year_text!r}") from None
            reactions.append((rsmi, {"year": year, "patent_id": patent_id}))
    return reactions
