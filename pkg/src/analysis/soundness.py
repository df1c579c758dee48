from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

from src.analysis.objects import STAR, AbstractObject, RegisterVar
from src.analysis.state import PointsToState


class LocationKind(str, Enum):
    REGISTER = "register"
    CELL = "cell"


@dataclass(frozen=True)
class ObservedFact:
    """
    A run-time observation that ``location`` held an address inside a heap
    object allocated at static site ``target``.

    Registers are named by ``function``/``register``; memory cells by the
    static id string of the container object and a byte offset.
    """

    kind: LocationKind
    target: str
    function: Optional[str] = None
    register: Optional[str] = None
    container: Optional[str] = None
    offset: int = 0

    def __str__(self) -> str:
        if self.kind == LocationKind.REGISTER:
            return f"{self.function}.%{self.register} -> {self.target}"
        return f"{self.container}+{self.offset} -> {self.target}"


def _cell_covers(state: PointsToState, container: AbstractObject, offset: int, target: AbstractObject) -> bool:
    candidates = [state.field_object(container, offset), state.field_object(container, STAR)]
    if offset == 0:
        candidates.append(container)
    return any(
        node is not None and any(t.base == target for t in state.points_to(node)) for node in candidates
    )


def check_soundness(state: PointsToState, observed: Iterable[ObservedFact]) -> list[ObservedFact]:
    """
    Observed facts with no counterpart in ``state``; an empty list means the
    run stayed inside the analysis result.
    """
    violations = []
    for fact in observed:
        target = state.objects.by_id.get(fact.target)
        if target is None:
            violations.append(fact)
            continue
        if fact.kind == LocationKind.REGISTER:
            covered = state.may_point_to(RegisterVar(fact.function, fact.register), target)
        else:
            container = state.objects.by_id.get(fact.container)
            covered = container is not None and _cell_covers(state, container, fact.offset, target)
        if not covered:
            violations.append(fact)
    return violations
