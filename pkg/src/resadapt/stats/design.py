"""Formula-driven design matrices with dummy coding and interactions.

The formula language is deliberately small: ``y ~ a + b:c + d*e`` where
``:`` is a plain interaction and ``*`` expands to main effects plus the
interaction. Interactions always pull in their main effects so every
product column has its marginals in the matrix. Categorical variables
(strings or booleans) are dummy-coded against a declared reference level;
numeric variables enter as-is. An intercept column is always included.

Dummy columns are named ``var=level``; interaction columns join their
factors with ``:`` (e.g. ``activity=walking:si``).
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError

INTERCEPT = "intercept"


def parse_formula(formula: str):
    """Split ``response ~ terms`` into (response, ordered unique term tuples)."""
    if "~" not in formula:
        raise ValidationError(f"formula {formula!r} lacks '~'")
    lhs, rhs = formula.split("~", 1)
    response = lhs.strip()
    if not response:
        raise ValidationError("formula has an empty response")
    terms = []

    def add(term):
        if term not in terms:
            terms.append(term)

    for atom in rhs.split("+"):
        atom = atom.strip()
        if not atom:
            raise ValidationError(f"empty term in formula {formula!r}")
        if atom == "1":
            continue  # the intercept is always included
        if "*" in atom:
            names = tuple(p.strip() for p in atom.split("*"))
            if any(not n for n in names):
                raise ValidationError(f"malformed term {atom!r}")
            for name in names:
                add((name,))
            add(names)
        elif ":" in atom:
            names = tuple(p.strip() for p in atom.split(":"))
            if any(not n for n in names):
                raise ValidationError(f"malformed term {atom!r}")
            # interactions imply their main effects
            for name in names:
                add((name,))
            add(names)
        else:
            add((atom,))
    return response, terms


@dataclass
class _Variable:
    name: str
    categorical: bool
    levels: list | None    # categorical only, reference first
    reference: str | None


@dataclass
class DesignMatrix:
    columns: list
    matrix: np.ndarray
    response: np.ndarray | None
    response_name: str | None
    reference_levels: dict
    formula: str
    variables: dict
    terms: list

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def p(self) -> int:
        return self.matrix.shape[1]

    def encode(self, rows) -> np.ndarray:
        """Encode new rows into this design's column space (no response)."""
        return _assemble(rows, self.terms, self.variables)[1]


def _canon_level(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _classify_variables(rows, terms, reference):
    names = sorted({name for term in terms for name in term})
    variables = {}
    for name in names:
        values = []
        for i, row in enumerate(rows):
            if name not in row:
                raise ValidationError(f"row {i} lacks field {name!r}")
            values.append(row[name])
        categorical = any(isinstance(v, (str, bool)) for v in values)
        if categorical:
            levels = sorted({_canon_level(v) for v in values})
            if len(levels) < 2:
                raise ValidationError(
                    f"categorical factor {name!r} has a single observed level "
                    f"{levels[0]!r}")
            ref = reference.get(name)
            if ref is not None:
                ref = _canon_level(ref)
                if ref not in levels:
                    raise ValidationError(
                        f"reference level {ref!r} not observed for {name!r}")
            else:
                ref = levels[0]
            levels = [ref] + [l for l in levels if l != ref]
            variables[name] = _Variable(name, True, levels, ref)
        else:
            variables[name] = _Variable(name, False, None, None)
    return variables


def _variable_columns(rows, var: _Variable):
    """Expanded (name, vector) pairs for one variable."""
    if not var.categorical:
        try:
            vec = np.array([float(row[var.name]) for row in rows])
        except (TypeError, ValueError):
            raise ValidationError(f"non-numeric value in field {var.name!r}") from None
        return [(var.name, vec)]
    cols = []
    observed = [_canon_level(row[var.name]) for row in rows]
    unseen = sorted(set(observed) - set(var.levels))
    if unseen:
        raise ValidationError(f"unseen level(s) {unseen} for factor {var.name!r}")
    for level in var.levels[1:]:
        vec = np.array([1.0 if v == level else 0.0 for v in observed])
        cols.append((f"{var.name}={level}", vec))
    return cols


def _assemble(rows, terms, variables):
    rows = list(rows)
    if not rows:
        raise ValidationError("cannot build a design matrix from zero rows")
    columns = [INTERCEPT]
    vectors = [np.ones(len(rows))]
    for term in terms:
        expanded = [_variable_columns(rows, variables[name]) for name in term]
        # cartesian product over each variable's dummy/numeric columns
        combos = [([], None)]
        for group in expanded:
            combos = [
                (names + [cname], vec if prod is None else prod * vec)
                for names, prod in combos
                for cname, vec in group
            ]
        for names, vec in combos:
            columns.append(":".join(names))
            vectors.append(vec)
    return columns, np.column_stack(vectors)


def dependent_columns(matrix: np.ndarray, columns) -> list:
    """Names of columns that are linearly dependent on earlier ones."""
    offenders = []
    kept = np.empty((matrix.shape[0], 0))
    rank = 0
    for j, name in enumerate(columns):
        candidate = np.column_stack([kept, matrix[:, j]])
        new_rank = np.linalg.matrix_rank(candidate)
        if new_rank > rank:
            kept, rank = candidate, new_rank
        else:
            offenders.append(name)
    return offenders


def build_design(rows, formula: str, reference: dict | None = None,
                 require_full_rank: bool = True) -> DesignMatrix:
    """Build a design matrix from mapping rows and a formula.

    *reference* maps factor name -> reference level; factors without an
    entry use their first sorted level. Raises on single-level factors,
    missing fields, and (by default) rank deficiency, naming the dependent
    columns.
    """
    rows = list(rows)
    response_name, terms = parse_formula(formula)
    variables = _classify_variables(rows, terms, reference or {})
    columns, matrix = _assemble(rows, terms, variables)

    try:
        y = np.array([float(row[response_name]) for row in rows])
    except KeyError:
        raise ValidationError(f"rows lack response field {response_name!r}") from None

    if require_full_rank:
        offenders = dependent_columns(matrix, columns)
        if offenders:
            raise ValidationError(f"rank-deficient design; dependent columns: {offenders}")

    return DesignMatrix(
        columns=columns,
        matrix=matrix,
        response=y,
        response_name=response_name,
        reference_levels={v.name: v.reference for v in variables.values() if v.categorical},
        formula=formula,
        variables=variables,
        terms=terms,
    )
