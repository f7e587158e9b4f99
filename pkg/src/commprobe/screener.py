"""SWED questionnaire administration, answer parsing, majority voting, and
risk scoring (WCS scale plus the C1/C2/C3 criteria).

Each question is posed to a community-aligned generation backend many times;
the sampled answers are parsed under the constrained answer format ("only
with the letter at the beginning of each option or with a number"),
aggregated by majority vote (median for numeric questions), and the winning
answers feed the Weight Concerns Scale and the three binary criteria.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import statistics
from dataclasses import dataclass
from importlib.resources import files
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .backend import ANSWER_MAX_TOKENS, BackendError, GenerationRequest, render

logger = logging.getLogger("commprobe.screener")

# Pin of the bundled questionnaire file; keeps the scoring tables below and
# the question definitions from drifting apart.
QUESTIONNAIRE_SHA256 = "396eff4d98bad4133197ab3a1e660e5c3914fd61b8eb3384252db2d4f9a39861"

WCS_QUESTION_IDS = (5, 6, 7, 8, 9)
CRITERIA_Q_IMPORTANCE = 8  # C1: answered c or d
CRITERIA_Q_FEAR = 6  # C2: answered c, d, or e
CRITERIA_Q_BEHAVIORS = 11  # C3: >= 3 parts answered yes
C3_MIN_YES = 3

DEFAULT_SAMPLES = 50
DEFAULT_MIN_VALID_FRACTION = 0.5

_LETTER_RE = re.compile(r"(?<![A-Za-z0-9])([A-Za-z])(?![A-Za-z0-9])")
_NUMBER_RE = re.compile(r"[-+]?\d+(?:\.\d+)?")
_YESNO_RE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)


class ScreenerError(Exception):
    pass


class IncompleteResultError(ScreenerError):
    pass


@dataclass(frozen=True)
class Question:
    id: int
    text: str
    kind: str  # choice | numeric | multi_part
    options: tuple[tuple[str, str], ...] = ()
    parts: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.kind not in ("choice", "numeric", "multi_part"):
            raise ScreenerError(f"question {self.id}: unknown kind {self.kind!r}")
        if self.kind == "choice":
            if len(self.options) < 2:
                raise ScreenerError(f"question {self.id}: choice needs >= 2 options")
            expected = [chr(ord("a") + i) for i in range(len(self.options))]
            if [l for l, _ in self.options] != expected:
                raise ScreenerError(
                    f"question {self.id}: options must be lettered consecutively from 'a'"
                )
        if self.kind == "multi_part":
            if not self.parts:
                raise ScreenerError(f"question {self.id}: multi_part needs parts")
            expected = [chr(ord("a") + i) for i in range(len(self.parts))]
            if [l for l, _ in self.parts] != expected:
                raise ScreenerError(
                    f"question {self.id}: parts must be lettered consecutively from 'a'"
                )

    @property
    def letters(self) -> tuple[str, ...]:
        return tuple(l for l, _ in self.options)


@dataclass(frozen=True)
class Questionnaire:
    name: str
    questions: tuple[Question, ...]

    def __post_init__(self):
        ids = [q.id for q in self.questions]
        if ids != list(range(1, len(ids) + 1)):
            raise ScreenerError("question ids must be dense starting at 1")

    def by_id(self, qid: int) -> Question:
        return self.questions[qid - 1]

    def prompt_count(self) -> int:
        """Prompts issued per administration (multi-part questions fan out)."""
        return sum(len(q.parts) if q.kind == "multi_part" else 1 for q in self.questions)


def _validate_swed_shape(qn: Questionnaire) -> None:
    if len(qn.questions) != 12:
        raise ScreenerError("expected 12 questionnaire items")
    numeric_ids = {q.id for q in qn.questions if q.kind == "numeric"}
    if numeric_ids != {2, 3, 4, 10}:
        raise ScreenerError("questions 2-4 and 10 must be the numeric items")
    multi = [q for q in qn.questions if q.kind == "multi_part"]
    if [q.id for q in multi] != [11] or len(multi[0].parts) != 4:
        raise ScreenerError("question 11 must be the only multi-part item, with 4 parts")
    for qid, k in zip(WCS_QUESTION_IDS, (5, 5, 7, 4, 5)):
        if len(qn.by_id(qid).options) != k:
            raise ScreenerError(f"question {qid} must have {k} options")


def load_questionnaire(path: str | Path | None = None) -> Questionnaire:
    """Load the questionnaire definition (bundled SWED file by default).

    The bundled file must match its pinned checksum; a user-supplied file
    skips the pin but still has to pass full shape validation.
    """
    if path is None:
        raw = files("commprobe").joinpath("data/questionnaire.json").read_bytes()
        digest = hashlib.sha256(raw).hexdigest()
        if digest != QUESTIONNAIRE_SHA256:
            raise ScreenerError(
                f"bundled questionnaire checksum mismatch: {digest} != {QUESTIONNAIRE_SHA256}"
            )
    else:
        raw = Path(path).read_bytes()
    data = json.loads(raw.decode("utf-8"))
    questions = tuple(
        Question(
            id=int(q["id"]),
            text=q["text"],
            kind=q["kind"],
            options=tuple((l, t) for l, t in q.get("options", [])),
            parts=tuple((l, t) for l, t in q.get("parts", [])),
        )
        for q in data["questions"]
    )
    qn = Questionnaire(name=data.get("name", "questionnaire"), questions=questions)
    _validate_swed_shape(qn)
    return qn


# ---------------------------------------------------------------------------
# Parsing and voting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParsedAnswer:
    question_id: int
    value: object  # option letter, float, or "yes"/"no"
    raw: str
    part: Optional[str] = None


def parse(raw: str, q: Question, part: Optional[str] = None) -> Optional[ParsedAnswer]:
    """Extract the constrained answer from one sampled response.

    Choice: first standalone letter that is one of the question's options
    (case-insensitive; parenthesized or period-suffixed forms count).
    Numeric: first numeric token, which must be non-negative.
    Multi-part: yes/no token, or a count (> 0 means yes).
    Returns None when nothing usable is found.
    """
    if raw is None:
        return None
    if q.kind == "multi_part":
        if part is None:
            raise ScreenerError("multi_part questions are parsed per part")
        m = _YESNO_RE.search(raw)
        if m:
            return ParsedAnswer(q.id, m.group(1).lower(), raw, part)
        m = _NUMBER_RE.search(raw)
        if m:
            count = float(m.group(0))
            if count < 0:
                return None
            return ParsedAnswer(q.id, "yes" if count > 0 else "no", raw, part)
        return None
    if q.kind == "numeric":
        m = _NUMBER_RE.search(raw)
        if not m:
            return None
        value = float(m.group(0))
        if not value >= 0:
            return None
        return ParsedAnswer(q.id, value, raw)
    # choice
    valid = set(q.letters)
    for m in _LETTER_RE.finditer(raw):
        letter = m.group(1).lower()
        if letter in valid:
            return ParsedAnswer(q.id, letter, raw)
    return None


@dataclass
class VoteOutcome:
    winner: Optional[object]
    tally: dict
    n_total: int
    n_unparseable: int
    failed: bool = False


def majority_vote(
    answers: Sequence[Optional[ParsedAnswer]],
    q: Question,
    part: Optional[str] = None,
    min_valid_fraction: float = DEFAULT_MIN_VALID_FRACTION,
) -> VoteOutcome:
    """Modal answer across samples; ties break toward the lower-risk option
    (earlier letter; "no" for yes/no parts). Numeric questions aggregate by
    median. Unparseable responses are excluded from the vote but counted,
    and a question whose valid fraction falls below the guard is unanswered.
    """
    total = len(answers)
    valid = [a for a in answers if a is not None]
    n_unparseable = total - len(valid)
    if total == 0 or not valid or len(valid) / total < min_valid_fraction:
        return VoteOutcome(None, {}, total, n_unparseable)
    if q.kind == "numeric":
        values = [float(a.value) for a in valid]
        return VoteOutcome(float(statistics.median(values)), {}, total, n_unparseable)
    tally: dict[str, int] = {}
    for a in valid:
        tally[str(a.value)] = tally.get(str(a.value), 0) + 1
    top = max(tally.values())
    tied = [v for v, c in tally.items() if c == top]
    if q.kind == "multi_part":
        winner = "no" if "no" in tied else tied[0]
    else:
        winner = min(tied)  # earlier letter = lower risk
    return VoteOutcome(winner, tally, total, n_unparseable)


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------


def option_score(q: Question, letter: str) -> float:
    """Linear 0-100 mapping of the chosen option's index."""
    letters = list(q.letters)
    if letter not in letters:
        raise ScreenerError(f"question {q.id}: no option {letter!r}")
    k = len(letters)
    return 100.0 * letters.index(letter) / (k - 1)


def wcs_score(winners: Mapping[int, str], questionnaire: Questionnaire) -> float:
    """Weight Concerns Scale: mean of the Q5-Q9 item scores."""
    scores = []
    for qid in WCS_QUESTION_IDS:
        letter = winners.get(qid)
        if letter is None:
            raise IncompleteResultError(f"question {qid} has no winning answer")
        scores.append(option_score(questionnaire.by_id(qid), letter))
    return sum(scores) / len(scores)


def criteria(
    winners: Mapping[int, str], part_winners: Mapping[str, str]
) -> tuple[bool, bool, bool]:
    """C1: weight more/most important (Q8 in {c, d}); C2: at least moderately
    afraid of gaining 3 pounds (Q6 in {c, d, e}); C3: >= 3 of the 4
    compensatory behaviors affirmed (Q11)."""
    q8 = winners.get(CRITERIA_Q_IMPORTANCE)
    q6 = winners.get(CRITERIA_Q_FEAR)
    if q8 is None or q6 is None:
        raise IncompleteResultError("criteria need winning answers for Q6 and Q8")
    for letter in ("a", "b", "c", "d"):
        if part_winners.get(letter) is None:
            raise IncompleteResultError(f"criteria need all Q11 parts; missing {letter!r}")
    c1 = q8 in ("c", "d")
    c2 = q6 in ("c", "d", "e")
    c3 = sum(1 for letter in ("a", "b", "c", "d") if part_winners[letter] == "yes") >= C3_MIN_YES
    return c1, c2, c3


# ---------------------------------------------------------------------------
# Administration
# ---------------------------------------------------------------------------


def _question_binding(q: Question, part: Optional[str] = None) -> str:
    if q.kind == "multi_part":
        part_text = dict(q.parts)[part]
        return f"{q.text} {part_text}"
    if q.kind == "choice":
        lines = [q.text] + [f"{letter}. {text}" for letter, text in q.options]
        return "\n".join(lines)
    return q.text


def question_prompt(community: str, q: Question, part: Optional[str] = None) -> str:
    return render("swed", {"community_name": community, "question": _question_binding(q, part)})


def administer(
    backend,
    community: str,
    questionnaire: Questionnaire,
    n: int = DEFAULT_SAMPLES,
    temperature: float = 1.0,
    seed: int = 0,
) -> dict[str, Optional[list[str]]]:
    """Collect n sampled responses per question (each multi-part item is
    asked once per part). A question whose backend call fails after retries
    is marked failed (None) and the run continues.
    """
    responses: dict[str, Optional[list[str]]] = {}
    for q in questionnaire.questions:
        keys_parts: list[tuple[str, Optional[str]]]
        if q.kind == "multi_part":
            keys_parts = [(f"{q.id}{letter}", letter) for letter, _ in q.parts]
        else:
            keys_parts = [(str(q.id), None)]
        for key, part in keys_parts:
            prompt = question_prompt(community, q, part)
            request = GenerationRequest(
                prompt=prompt,
                n_samples=n,
                temperature=temperature,
                max_tokens=ANSWER_MAX_TOKENS,
                seed=seed,
            )
            try:
                result = backend.generate(request)
            except BackendError as exc:
                logger.error("question %s failed: %s", key, exc)
                responses[key] = None
                continue
            responses[key] = [c if c is not None else "" for c in result.completions]
    return responses


@dataclass
class ScreeningResult:
    community: str
    outcomes: dict[str, VoteOutcome]
    wcs: Optional[float]
    c1: Optional[bool]
    c2: Optional[bool]
    c3: Optional[bool]
    n_samples: int
    complete: bool

    def winners(self) -> dict[str, object]:
        return {key: o.winner for key, o in self.outcomes.items()}

    def to_record(self) -> dict:
        return {
            "community": self.community,
            "wcs": None if self.wcs is None else round(self.wcs, 1),
            "wcs_exact": self.wcs,
            "c1": self.c1,
            "c2": self.c2,
            "c3": self.c3,
            "complete": self.complete,
            "n_samples": self.n_samples,
            "winners": {k: self.outcomes[k].winner for k in sorted(self.outcomes)},
            "tallies": {k: self.outcomes[k].tally for k in sorted(self.outcomes)},
            "n_unparseable": {
                k: self.outcomes[k].n_unparseable for k in sorted(self.outcomes)
            },
        }


def score_responses(
    community: str,
    responses: Mapping[str, Optional[list[str]]],
    questionnaire: Questionnaire,
    min_valid_fraction: float = DEFAULT_MIN_VALID_FRACTION,
) -> ScreeningResult:
    """Parse and vote every question's samples, then score the result."""
    outcomes: dict[str, VoteOutcome] = {}
    n_samples = 0
    for q in questionnaire.questions:
        if q.kind == "multi_part":
            items = [(f"{q.id}{letter}", letter) for letter, _ in q.parts]
        else:
            items = [(str(q.id), None)]
        for key, part in items:
            raws = responses.get(key)
            if raws is None:
                outcomes[key] = VoteOutcome(None, {}, 0, 0, failed=True)
                continue
            n_samples = max(n_samples, len(raws))
            parsed = [parse(raw, q, part) for raw in raws]
            outcomes[key] = majority_vote(parsed, q, part, min_valid_fraction)

    choice_winners = {
        q.id: outcomes[str(q.id)].winner
        for q in questionnaire.questions
        if q.kind == "choice"
    }
    part_winners = {
        letter: outcomes[f"{CRITERIA_Q_BEHAVIORS}{letter}"].winner
        for letter in ("a", "b", "c", "d")
    }
    wcs: Optional[float] = None
    flags: tuple[Optional[bool], Optional[bool], Optional[bool]] = (None, None, None)
    complete = True
    try:
        wcs = wcs_score(choice_winners, questionnaire)
        flags = criteria(choice_winners, part_winners)
    except IncompleteResultError as exc:
        logger.warning("community %r screening incomplete: %s", community, exc)
        complete = False
    return ScreeningResult(
        community=community,
        outcomes=outcomes,
        wcs=wcs,
        c1=flags[0],
        c2=flags[1],
        c3=flags[2],
        n_samples=n_samples,
        complete=complete,
    )


def screen_community(
    backend,
    community: str,
    questionnaire: Questionnaire,
    n: int = DEFAULT_SAMPLES,
    temperature: float = 1.0,
    seed: int = 0,
    min_valid_fraction: float = DEFAULT_MIN_VALID_FRACTION,
) -> ScreeningResult:
    responses = administer(backend, community, questionnaire, n, temperature, seed)
    return score_responses(community, responses, questionnaire, min_valid_fraction)


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------


def sort_results(results: Sequence[ScreeningResult]) -> list[ScreeningResult]:
    """WCS descending, incomplete rows last, stable by community name."""
    return sorted(
        results,
        key=lambda r: (r.wcs is None, -(r.wcs if r.wcs is not None else 0.0), r.community),
    )


def render_table(results: Sequence[ScreeningResult]) -> str:
    rows = [("Community", "WCS", "C1", "C2", "C3")]
    for r in sort_results(results):
        if r.complete:
            fmt = lambda b: "T" if b else "F"
            rows.append((r.community, f"{r.wcs:.1f}", fmt(r.c1), fmt(r.c2), fmt(r.c3)))
        else:
            rows.append((r.community, "incomplete", "-", "-", "-"))
    widths = [max(len(row[i]) for row in rows) for i in range(5)]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)) for row in rows]
    return "\n".join(lines)


def write_report(
    results: Sequence[ScreeningResult],
    json_path: str | Path,
    csv_path: str | Path | None = None,
) -> bool:
    """Emit the screening report; returns True when every result is complete."""
    if not results:
        raise ScreenerError("no screening results to report")
    ordered = sort_results(results)
    payload = {"communities": [r.to_record() for r in ordered]}
    Path(json_path).write_text(
        json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    if csv_path is not None:
        import csv as _csv

        with open(csv_path, "w", newline="", encoding="utf-8") as f:
            writer = _csv.writer(f)
            writer.writerow(["community", "wcs", "c1", "c2", "c3", "complete"])
            for r in ordered:
                writer.writerow(
                    [
                        r.community,
                        "" if r.wcs is None else f"{r.wcs:.1f}",
                        r.c1,
                        r.c2,
                        r.c3,
                        r.complete,
                    ]
                )
    return all(r.complete for r in ordered)
