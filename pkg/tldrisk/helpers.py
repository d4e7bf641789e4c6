import json
import logging
from collections import Counter
from typing import Any, Iterable, List, Type, TypeVar, Union
from pydantic import BaseModel, ValidationError
from tldrisk.exceptions import DocumentParseError, IntegrityError

logger = logging.getLogger(__name__)

Document = Union[str, bytes, dict, list]
ModelT = TypeVar("ModelT", bound=BaseModel)

def parse_document(document: Document, label: str = "document") -> Any:
    """
    Decode a JSON document, or pass through one that is already decoded.

    Args:
        document (str | bytes | dict | list): JSON text, or the decoded value.
        label (str): Name of the document, used in error messages.

    Returns:
        data (Any): The decoded JSON value.
    """
    if not isinstance(document, (str, bytes)):
        return document
    try:
        return json.loads(document)
    except json.JSONDecodeError as e:
        raise DocumentParseError(
            f"{label}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}"
        ) from e

def build_model(model: Type[ModelT], data: Any, label: str = "document") -> ModelT:
    """
    Validate decoded data into a pydantic model, reporting the first bad field path.
    """
    try:
        return model.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"]) or "<root>"
        raise DocumentParseError(
            f"{label}: field `{location}`: {first['msg']} ({e.error_count()} error(s))"
        ) from e

def require_key(data: Any, key: str, label: str = "document") -> list:
    """Fetch a top-level array field, which every catalog-style document has."""
    if not isinstance(data, dict):
        raise DocumentParseError(f"{label}: expected a JSON object with field `{key}`")
    records = data.get(key, [])
    if not isinstance(records, list):
        raise DocumentParseError(f"{label}: field `{key}` must be an array")
    return records

def find_duplicates(ids: Iterable[Any]) -> List[Any]:
    return sorted(k for k, count in Counter(ids).items() if count > 1)

def check_unique_ids(records: list, label: str = "document") -> None:
    """
    Raise `IntegrityError` naming every id that appears more than once.

    Records without an id are left for schema validation to reject.
    """
    ids = [r.get("id") for r in records if isinstance(r, dict) and r.get("id") is not None]
    duplicates = find_duplicates(ids)
    if duplicates:
        raise IntegrityError(f"{label}: duplicate id(s): {', '.join(map(str, duplicates))}")

def dump_document(model: BaseModel) -> str:
    """Canonical JSON text: two-space indent, trailing newline."""
    return json.dumps(model.model_dump(mode='json', by_alias=True), indent=2, ensure_ascii=False) + "\n"
