"""JSON encodings for matrices, states, measurements and assemblages.

Complex scalars are ``[re, im]`` pairs and matrices nested row-major lists of
them. Assemblage members are keyed ``"a|x"`` (one untrusted party) or
``"a,b|x,y"`` (two).
"""

from __future__ import annotations

import itertools
from typing import Any

import numpy as np

from .assemblage import SteeringAssemblage
from .povm import MeasurementAssemblage
from .states import PureState


class FormatError(ValueError):
    pass


def encode_complex_array(arr: np.ndarray) -> list:
    arr = np.asarray(arr, dtype=complex)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def decode_complex_array(data: Any) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != 2:
        raise FormatError("complex entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def matrix_to_json(mat: np.ndarray, dims: tuple[int, ...] | None = None) -> dict:
    mat = np.asarray(mat)
    return {"dims": list(dims or (mat.shape[0],)), "data": encode_complex_array(mat)}


def matrix_from_json(obj: dict) -> tuple[np.ndarray, tuple[int, ...]]:
    try:
        mat = decode_complex_array(obj["data"])
        dims = tuple(int(d) for d in obj["dims"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed matrix object: {exc}") from exc
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] != int(np.prod(dims)):
        raise FormatError(f"matrix of shape {mat.shape} does not match dims {dims}")
    return mat, dims


def state_to_json(psi: PureState) -> dict:
    return {"dims": list(psi.dims), "amplitudes": encode_complex_array(psi.amplitudes)}


def state_from_json(obj: dict) -> PureState | tuple[np.ndarray, tuple[int, ...]]:
    """A :class:`PureState`, or ``(density matrix, dims)`` for a matrix object."""
    if "amplitudes" in obj:
        try:
            return PureState(decode_complex_array(obj["amplitudes"]), tuple(obj["dims"]))
        except (KeyError, TypeError) as exc:
            raise FormatError(f"malformed state object: {exc}") from exc
    return matrix_from_json(obj)


def measurement_to_json(m: MeasurementAssemblage) -> dict:
    return {
        "dims": [m.d],
        "n_outcomes": m.n_outcomes,
        "n_settings": m.n_settings,
        "elements": [[encode_complex_array(m.elements[a, x]) for x in range(m.n_settings)] for a in range(m.n_outcomes)],
    }


def measurement_from_json(obj: dict) -> MeasurementAssemblage:
    try:
        el = decode_complex_array(obj["elements"])
    except KeyError as exc:
        raise FormatError("measurement object needs 'elements'") from exc
    if el.ndim != 4:
        raise FormatError("measurement elements must be indexed [a][x] with d x d matrices")
    for key, axis in (("n_outcomes", 0), ("n_settings", 1)):
        if key in obj and int(obj[key]) != el.shape[axis]:
            raise FormatError(f"{key}={obj[key]} does not match the elements array")
    return MeasurementAssemblage(el)


def _member_key(idx: tuple[int, ...], k: int) -> str:
    return ",".join(map(str, idx[:k])) + "|" + ",".join(map(str, idx[k:]))


def assemblage_to_json(s: SteeringAssemblage) -> dict:
    k = s.n_untrusted
    shape = s.members.shape[: 2 * k]
    members = {_member_key(idx, k): encode_complex_array(s.members[idx]) for idx in itertools.product(*map(range, shape))}
    return {
        "scenario": s.scenario,
        "trusted_dims": list(s.trusted_dims),
        "n_outcomes": list(s.n_outcomes),
        "n_settings": list(s.n_settings),
        "members": members,
    }


def assemblage_from_json(obj: dict) -> SteeringAssemblage:
    try:
        dims = tuple(int(d) for d in obj["trusted_dims"])
        n_out = tuple(int(v) for v in obj["n_outcomes"])
        n_set = tuple(int(v) for v in obj["n_settings"])
        raw = obj["members"]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed assemblage object: {exc}") from exc
    k = len(n_out)
    if len(n_set) != k:
        raise FormatError("n_outcomes and n_settings disagree on the number of untrusted parties")
    d = int(np.prod(dims))
    members = np.zeros(n_out + n_set + (d, d), dtype=complex)
    for idx in itertools.product(*map(range, n_out + n_set)):
        key = _member_key(idx, k)
        if key not in raw:
            raise FormatError(f"assemblage is missing member {key!r}")
        members[idx] = decode_complex_array(raw[key])
    return SteeringAssemblage(members, k, dims)


def to_jsonable(value: Any) -> Any:
    """Recursively convert numpy values (complex as ``[re, im]``) to JSON types."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return encode_complex_array(value) if np.iscomplexobj(value) else value.tolist()
    if isinstance(value, np.generic):
        return to_jsonable(value.item())
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value
