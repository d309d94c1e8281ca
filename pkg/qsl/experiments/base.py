from abc import ABC, abstractmethod
from typing import Any, ClassVar, Optional

import docstring_parser
import numpy as np
import pydantic

from ..units import UnitSystem


class RunNotes:
    """Scalar findings an experiment records next to its table; they end up in the JSON metadata."""

    def __init__(self):
        self.data: dict[str, Any] = {}

    @staticmethod
    def _check(name):
        if not isinstance(name, str) or not name:
            raise ValueError("note names must be non-empty strings")

    def set(self, name: str, value: Any):
        self._check(name)
        # numpy scalars do not survive json.dumps
        if isinstance(value, np.generic):
            value = value.item()
        self.data[name] = value

    def get(self, name: str, default: Any = None) -> Any:
        self._check(name)
        return self.data.get(name, default)

    def as_dict(self) -> dict[str, Any]:
        return dict(self.data)


class ExperimentResult(pydantic.BaseModel):
    """Tabular output of an experiment plus the scalar notes it collected along the way."""
    model_config = pydantic.ConfigDict(frozen=True)

    columns: tuple[str, ...]
    rows: list[tuple[Any, ...]]
    metadata: dict[str, Any] = {}

    @pydantic.model_validator(mode='after')
    def _check_rows(self):
        width = len(self.columns)
        for k, row in enumerate(self.rows):
            if len(row) != width:
                raise ValueError(f"row {k} has {len(row)} entries, expected {width}")
        return self

    def column(self, name: str) -> list[Any]:
        index = self.columns.index(name)
        return [row[index] for row in self.rows]


class BaseExperiment(pydantic.BaseModel, ABC):
    """
    Base class for all experiments. All experiments should inherit from this class.
    The fields are the experiment's parameters; `run` executes it and returns the table
    written to CSV. Each experiment documents its parameters in the `Args` section of its
    docstring, which is what `qsl list` shows.
    """
    model_config = pydantic.ConfigDict(extra='forbid', frozen=True, populate_by_name=True)

    tag: ClassVar[str]
    presets: ClassVar[tuple[str, ...]] = ()

    seed: int = 0
    hbar: pydantic.PositiveFloat = 1.0

    _notes: Optional[RunNotes] = pydantic.PrivateAttr(default=None)

    @property
    def notes(self) -> RunNotes:
        if self._notes is None:
            self._notes = RunNotes()
        return self._notes

    @property
    def units(self) -> UnitSystem:
        return UnitSystem(hbar=self.hbar)

    def result(self, columns: tuple[str, ...], rows: list[tuple[Any, ...]]) -> ExperimentResult:
        return ExperimentResult(columns=columns, rows=rows, metadata=self.notes.as_dict())

    @classmethod
    def describe(cls) -> tuple[str, dict[str, str]]:
        """One-line summary and per-parameter help parsed from the class docstring."""
        doc = docstring_parser.parse(cls.__doc__ or "")
        return doc.short_description or "", {p.arg_name: p.description or "" for p in doc.params}

    @abstractmethod
    def run(self) -> ExperimentResult: ...
