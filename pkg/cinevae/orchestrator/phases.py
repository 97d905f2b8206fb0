"""Phase dependency graph of the experiment pipeline."""

from collections import defaultdict
from collections.abc import Iterable, Mapping

from ..models.experiment import Phase

CANONICAL_ORDER = [
    Phase.GENERATE,
    Phase.PRETRAIN,
    Phase.TRAIN,
    Phase.EVAL,
    Phase.INTERPRET,
]

PHASE_REQUIRES: dict[Phase, set[Phase]] = {
    Phase.GENERATE: set(),
    Phase.PRETRAIN: {Phase.GENERATE},
    Phase.TRAIN: {Phase.PRETRAIN},
    Phase.EVAL: {Phase.TRAIN},
    Phase.INTERPRET: {Phase.TRAIN},
}


def parse_phases(names: Iterable[str]) -> set[Phase]:
    """Phase names (or "all") to Phase members; unknown names raise ValueError."""
    phases: set[Phase] = set()
    for name in names:
        name = name.strip().lower()
        if not name:
            continue
        if name == "all":
            phases.update(CANONICAL_ORDER)
        else:
            phases.add(Phase(name))
    return phases


class PhaseGraph:
    """
    Prerequisites between pipeline phases.

    Each phase lists the phases whose artifacts it reads; ordering is a
    topological sort that falls back to the canonical order between
    independent phases.
    """

    def __init__(self, requires: Mapping[Phase, set[Phase]] = PHASE_REQUIRES):
        self._graph: dict[Phase, set[Phase]] = defaultdict(set)          # phase -> needs
        self._reverse_graph: dict[Phase, set[Phase]] = defaultdict(set)  # phase -> needed by
        for phase, deps in requires.items():
            for dep in deps:
                self._graph[phase].add(dep)
                self._reverse_graph[dep].add(phase)

    def topological_order(self, phases: Iterable[Phase]) -> list[Phase]:
        """
        Return the requested phases, prerequisites first (Kahn's algorithm).

        Raises:
            ValueError: If the requested phases form a cycle
        """
        requested = set(phases)
        in_degree = {p: len(self._graph[p] & requested) for p in requested}
        queue = [p for p, degree in in_degree.items() if degree == 0]
        result = []
        while queue:
            queue.sort(key=CANONICAL_ORDER.index)
            current = queue.pop(0)
            result.append(current)
            for dependent in self._reverse_graph[current]:
                if dependent in in_degree:
                    in_degree[dependent] -= 1
                    if in_degree[dependent] == 0:
                        queue.append(dependent)
        if len(result) != len(requested):
            remaining = sorted(p.value for p in requested - set(result))
            raise ValueError(f"Circular dependency detected among phases: {remaining}")
        return result

    def get_dependencies(self, phase: Phase) -> set[Phase]:
        """Direct prerequisites of a phase."""
        return self._graph.get(phase, set()).copy()

    def get_dependents(self, phase: Phase) -> set[Phase]:
        """Phases that read this phase's artifacts."""
        return self._reverse_graph.get(phase, set()).copy()

    def downstream(self, phase: Phase) -> set[Phase]:
        """Every phase that transitively depends on this one."""
        seen: set[Phase] = set()
        stack = [phase]
        while stack:
            for dependent in self.get_dependents(stack.pop()):
                if dependent not in seen:
                    seen.add(dependent)
                    stack.append(dependent)
        return seen
