"""Token lattice: a DAG over token nodes with annotations and dependencies.

Nodes are tokens plus two virtual endpoints START and END. Sequence edges
order tokens in the text and may fork into alternative tokenizations;
dependency edges attach syntactic heads once a single path is selected.
Node ids are dense integers in creation order, so enumeration is
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    CycleDetected,
    EmptyAlternative,
    GraphInvariantError,
    OverlappingOffsets,
    TooManyPaths,
    UnknownNode,
)

PATH_LIMIT = 10_000


@dataclass
class TokenNode:
    id: int
    surface: str
    char_start: int
    char_end: int
    annotations: dict = field(default_factory=dict)

    @property
    def virtual(self):
        return self.char_start == self.char_end == -1


class AnalysisGraph:
    def __init__(self):
        self.nodes = {}
        self.sequence_edges = set()
        self.dependency_edges = set()
        self._next_id = 0
        self.start = self._new_node("", -1, -1).id
        self.end = self._new_node("", -1, -1).id
        self.selected_path = None

    # ---- construction ----------------------------------------------------

    def _new_node(self, surface, char_start, char_end):
        node = TokenNode(self._next_id, surface, char_start, char_end)
        self.nodes[node.id] = node
        self._next_id += 1
        return node

    def add_token(self, surface, char_start, char_end):
        if char_start >= char_end:
            raise OverlappingOffsets(
                f"token {surface!r} has empty span ({char_start}, {char_end})"
            )
        return self._new_node(surface, char_start, char_end)

    def add_sequence_edge(self, from_id, to_id):
        if from_id not in self.nodes or to_id not in self.nodes:
            raise UnknownNode(f"sequence edge ({from_id}, {to_id}) references unknown node")
        if self._reaches(to_id, from_id):
            raise CycleDetected(f"edge ({from_id}, {to_id}) would create a cycle")
        self.sequence_edges.add((from_id, to_id))

    def remove_sequence_edge(self, from_id, to_id):
        """Deletion must not strand a node off all START-to-END paths."""
        if (from_id, to_id) not in self.sequence_edges:
            raise UnknownNode(f"no sequence edge ({from_id}, {to_id})")
        self.sequence_edges.discard((from_id, to_id))
        try:
            self.validate()
        except GraphInvariantError:
            self.sequence_edges.add((from_id, to_id))
            raise

    def add_dependency(self, head_id, dependent_id, deprel):
        for node_id in (head_id, dependent_id):
            if node_id not in self.nodes:
                raise UnknownNode(f"dependency references unknown node {node_id}")
        if self.selected_path is not None:
            on_path = set(self.selected_path) | {self.start}
            if head_id not in on_path or dependent_id not in on_path:
                raise GraphInvariantError(
                    "dependency edge touches a node off the selected path"
                )
        self.dependency_edges.add((head_id, dependent_id, deprel))

    def select_path(self, node_ids):
        for node_id in node_ids:
            if node_id not in self.nodes:
                raise UnknownNode(f"selected path references unknown node {node_id}")
        self.selected_path = list(node_ids)

    # ---- traversal ---------------------------------------------------------

    def successors(self, node_id):
        return sorted(t for f, t in self.sequence_edges if f == node_id)

    def predecessors(self, node_id):
        return sorted(f for f, t in self.sequence_edges if t == node_id)

    def _reaches(self, src, dst):
        stack, seen = [src], set()
        while stack:
            v = stack.pop()
            if v == dst:
                return True
            if v in seen:
                continue
            seen.add(v)
            stack.extend(t for f, t in self.sequence_edges if f == v)
        return False

    def token_ids(self):
        return [i for i in sorted(self.nodes) if not self.nodes[i].virtual]

    def tokens_in_order(self):
        """Tokens along the selected path, or the single path of a chain."""
        if self.selected_path is not None:
            ids = self.selected_path
        else:
            paths = self.enumerate_paths()
            if len(paths) != 1:
                raise GraphInvariantError(
                    "graph has multiple paths and none was selected"
                )
            ids = paths[0]
        return [self.nodes[i] for i in ids]

    def enumerate_paths(self):
        """All START-to-END token-id sequences, lexicographic by node ids."""
        paths = []
        max_len = len(self.nodes)
        stack = [(self.start, [])]
        while stack:
            node_id, prefix = stack.pop()
            if len(prefix) > max_len:  # defensive: invariant violation
                raise CycleDetected("path longer than the node count")
            if node_id == self.end:
                paths.append(prefix)
                if len(paths) > PATH_LIMIT:
                    raise TooManyPaths(f"more than {PATH_LIMIT} paths in lattice")
                continue
            nxt = self.successors(node_id)
            if not nxt and node_id != self.end:
                raise GraphInvariantError(f"dead end at node {node_id}")
            # reversed so the lexicographically smallest branch pops first
            for t in reversed(nxt):
                suffix = prefix if node_id == self.start else prefix + [node_id]
                stack.append((t, suffix))
        return sorted(paths)

    def validate(self):
        """Check the DAG invariants; raises GraphInvariantError on violation."""
        if self.predecessors(self.start):
            raise GraphInvariantError("START has incoming edges")
        if self.successors(self.end):
            raise GraphInvariantError("END has outgoing edges")
        # iterative cycle check (chains can be long)
        color = {}
        stack = [(self.start, False)]
        while stack:
            v, done = stack.pop()
            if done:
                color[v] = 2
                continue
            if color.get(v) == 2:
                continue
            color[v] = 1
            stack.append((v, True))
            for t in self.successors(v):
                if color.get(t) == 1:
                    raise CycleDetected(f"cycle through node {t}")
                if color.get(t) != 2:
                    stack.append((t, False))
        reachable_from_start = set(color)
        reaches_end = {self.end}
        changed = True
        while changed:
            changed = False
            for f, t in self.sequence_edges:
                if t in reaches_end and f not in reaches_end:
                    reaches_end.add(f)
                    changed = True
        for node_id in self.nodes:
            if node_id == self.end:
                continue
            if node_id not in reachable_from_start or node_id not in reaches_end:
                raise GraphInvariantError(f"node {node_id} lies on no START-to-END path")

    # ---- debug dump --------------------------------------------------------

    def to_dot(self):
        lines = ["digraph analysis {", "  rankdir=LR;"]
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            if node.virtual:
                label = "START" if node_id == self.start else "END"
                lines.append(f'  n{node_id} [label="{label}" shape=point];')
            else:
                ann = "\\n".join(
                    f"{k}={v}" for k, v in sorted(node.annotations.items())
                )
                label = node.surface.replace('"', '\\"')
                if ann:
                    label += "\\n" + ann.replace('"', '\\"')
                lines.append(f'  n{node_id} [label="{label}" shape=box];')
        for f, t in sorted(self.sequence_edges):
            lines.append(f"  n{f} -> n{t};")
        for h, d, rel in sorted(self.dependency_edges):
            lines.append(f'  n{h} -> n{d} [style=dashed color=red label="{rel}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_linear_graph(tokens):
    """Single START->...->END chain from (surface, char_start, char_end) triples.

    Offsets must be strictly increasing and non-overlapping.
    """
    graph = AnalysisGraph()
    prev_end = -1
    prev_id = graph.start
    for surface, char_start, char_end in tokens:
        if char_start < prev_end:
            raise OverlappingOffsets(
                f"token {surface!r} at ({char_start}, {char_end}) overlaps previous token"
            )
        if char_start >= char_end:
            raise OverlappingOffsets(
                f"token {surface!r} has empty span ({char_start}, {char_end})"
            )
        node = graph.add_token(surface, char_start, char_end)
        graph.add_sequence_edge(prev_id, node.id)
        prev_id = node.id
        prev_end = char_end
    graph.add_sequence_edge(prev_id, graph.end)
    return graph


def add_alternative(graph, from_node, to_node, alt_tokens):
    """Add a parallel branch from ``from_node`` to ``to_node``.

    alt_tokens: TokenNode-like (surface, char_start, char_end) triples for the
    new branch; existing paths stay enumerable.
    """
    if from_node not in graph.nodes or to_node not in graph.nodes:
        raise UnknownNode(f"alternative endpoints ({from_node}, {to_node}) unknown")
    if not alt_tokens:
        raise EmptyAlternative("alternative branch needs at least one token")
    if not graph._reaches(from_node, to_node):
        raise UnknownNode(f"no existing subpath from {from_node} to {to_node}")
    prev = from_node
    for surface, char_start, char_end in alt_tokens:
        node = graph.add_token(surface, char_start, char_end)
        graph.add_sequence_edge(prev, node.id)
        prev = node.id
    graph.add_sequence_edge(prev, to_node)
    return graph
