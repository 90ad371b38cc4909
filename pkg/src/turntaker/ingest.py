"""Turn annotations and trait tables.

Annotation files are delimiter-separated with header ``meeting,speaker,start,end``
(seconds).  Trait files use
``member,team,extraversion,agreeableness,conscientiousness,sex,nationality``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

from .model import Roster, TurnSequence
from .stats import Nationality, Sex, TraitRecord

__all__ = [
    "ANNOTATION_HEADER",
    "TRAIT_HEADER",
    "IngestError",
    "RawAnnotation",
    "Dataset",
    "parse_annotations",
    "build_sequences",
    "parse_traits",
    "write_annotations",
    "load_dataset",
]

ANNOTATION_HEADER = ("meeting", "speaker", "start", "end")
TRAIT_HEADER = (
    "member",
    "team",
    "extraversion",
    "agreeableness",
    "conscientiousness",
    "sex",
    "nationality",
)

_SEX = {"male": Sex.MALE, "m": Sex.MALE, "female": Sex.FEMALE, "f": Sex.FEMALE}
_NATIONALITY = {
    "american": Nationality.AMERICAN,
    "non-american": Nationality.NON_AMERICAN,
    "non american": Nationality.NON_AMERICAN,
    "nonamerican": Nationality.NON_AMERICAN,
    "non_american": Nationality.NON_AMERICAN,
}


class IngestError(ValueError):
    """Input could not be parsed; ``errors`` lists ``(row, reason)`` pairs.

    Row numbers count the header as row 1.  Row 0 marks file-level problems.
    """

    def __init__(self, errors: Sequence[tuple[int, str]]):
        self.errors = list(errors)
        shown = "; ".join(f"row {r}: {msg}" for r, msg in self.errors[:5])
        more = f" (+{len(self.errors) - 5} more)" if len(self.errors) > 5 else ""
        super().__init__(shown + more)


@dataclass(frozen=True)
class RawAnnotation:
    meeting: str
    speaker: str
    start: float
    end: float

    def __post_init__(self):
        if not (math.isfinite(self.start) and self.start >= 0):
            raise ValueError("start must be a non-negative number of seconds")
        if not (math.isfinite(self.end) and self.end > self.start):
            raise ValueError("end must be later than start")


@dataclass(frozen=True)
class Dataset:
    roster: Roster
    meetings: tuple[tuple[str, TurnSequence], ...]
    traits: tuple[TraitRecord, ...] | None = field(default=None)

    def __post_init__(self):
        ids = [m for m, _ in self.meetings]
        if len(set(ids)) != len(ids):
            raise ValueError("meeting ids must be unique")
        for _, seq in self.meetings:
            if seq.roster != self.roster:
                raise ValueError("every meeting must use the dataset roster")

    @property
    def sequences(self) -> list[TurnSequence]:
        return [s for _, s in self.meetings]

    @property
    def total_turns(self) -> int:
        return sum(len(s) for _, s in self.meetings)


def _reader(text: TextIO | str, delimiter: str, header: Sequence[str]):
    if isinstance(text, str):
        text = io.StringIO(text)
    reader = csv.reader(text, delimiter=delimiter)
    try:
        first = next(reader)
    except StopIteration:
        raise IngestError([(0, "empty file: missing header")]) from None
    got = [h.strip().lower() for h in first]
    missing = [h for h in header if h not in got]
    if missing:
        raise IngestError([(1, f"header lacks column(s) {', '.join(missing)}")])
    return reader, [got.index(h) for h in header]


def parse_annotations(text: TextIO | str, delimiter: str = ",") -> list[RawAnnotation]:
    reader, cols = _reader(text, delimiter, ANNOTATION_HEADER)
    out: list[RawAnnotation] = []
    errors: list[tuple[int, str]] = []
    for rownum, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            meeting, speaker, start, end = (row[c].strip() for c in cols)
        except IndexError:
            errors.append((rownum, f"expected {len(ANNOTATION_HEADER)} fields, got {len(row)}"))
            continue
        if not meeting or not speaker:
            errors.append((rownum, "meeting and speaker must be non-empty"))
            continue
        try:
            out.append(RawAnnotation(meeting, speaker, float(start), float(end)))
        except ValueError as exc:
            errors.append((rownum, str(exc)))
    if errors:
        raise IngestError(errors)
    return out


def build_sequences(
    annotations: Iterable[RawAnnotation], roster: Roster | None = None
) -> Dataset:
    """Order each meeting by start time and merge same-speaker runs into turns.

    Ties are broken by end time, then speaker id.  Meetings keep the order in
    which they first appear.  The roster defaults to all speakers, sorted.
    """
    by_meeting: dict[str, list[RawAnnotation]] = {}
    for a in annotations:
        by_meeting.setdefault(a.meeting, []).append(a)
    if roster is None:
        roster = Roster(sorted({a.speaker for rows in by_meeting.values() for a in rows}))
    meetings = []
    for mid, rows in by_meeting.items():
        rows.sort(key=lambda a: (a.start, a.end, a.speaker))
        ids: list[str] = []
        for a in rows:
            if not ids or ids[-1] != a.speaker:
                ids.append(a.speaker)
        meetings.append((mid, TurnSequence.from_ids(roster, ids)))
    return Dataset(roster, tuple(meetings))


def _norm(value: str) -> str:
    return " ".join(value.strip().lower().split())


def parse_traits(text: TextIO | str, delimiter: str = ",") -> list[TraitRecord]:
    reader, cols = _reader(text, delimiter, TRAIT_HEADER)
    out: list[TraitRecord] = []
    errors: list[tuple[int, str]] = []
    for rownum, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            member, team, ext, agr, con, sex, nat = (row[c].strip() for c in cols)
        except IndexError:
            errors.append((rownum, f"expected {len(TRAIT_HEADER)} fields, got {len(row)}"))
            continue
        problems = []
        if not member or not team:
            problems.append("member and team must be non-empty")
        if _norm(sex) not in _SEX:
            problems.append(f"unknown sex {sex!r}")
        if _norm(nat) not in _NATIONALITY:
            problems.append(f"unknown nationality {nat!r}")
        try:
            values = [float(v) for v in (ext, agr, con)]
            if not all(math.isfinite(v) for v in values):
                raise ValueError
        except ValueError:
            problems.append("trait scores must be finite numbers")
        if problems:
            errors.append((rownum, "; ".join(problems)))
            continue
        out.append(
            TraitRecord(member, team, *values, _SEX[_norm(sex)], _NATIONALITY[_norm(nat)])
        )
    if errors:
        raise IngestError(errors)
    seen = [r.member for r in out]
    dupes = sorted({m for m in seen if seen.count(m) > 1})
    if dupes:
        raise IngestError([(0, f"duplicate member ids {dupes}")])
    return out


def write_annotations(
    meetings: Iterable[tuple[str, TurnSequence]], out: TextIO, delimiter: str = ","
) -> None:
    """Write turns as annotation rows; turn t of a meeting spans [t-1, t] seconds."""
    writer = csv.writer(out, delimiter=delimiter, lineterminator="\n")
    writer.writerow(ANNOTATION_HEADER)
    for mid, seq in meetings:
        for t, speaker in enumerate(seq.ids()):
            writer.writerow((mid, speaker, repr(float(t)), repr(float(t + 1))))


def load_dataset(
    annotations_path, traits_path=None, roster: Roster | None = None, delimiter: str = ","
) -> Dataset:
    with open(annotations_path, newline="", encoding="utf-8") as fh:
        ds = build_sequences(parse_annotations(fh, delimiter), roster)
    if traits_path is None:
        return ds
    with open(traits_path, newline="", encoding="utf-8") as fh:
        traits = tuple(parse_traits(fh, delimiter))
    return Dataset(ds.roster, ds.meetings, traits)
