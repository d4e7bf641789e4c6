import logging
from datetime import timedelta
from importlib import resources
from pathlib import Path
from typing import List, Optional, Sequence
import requests
from requests_cache import CachedSession
from tldrisk import afd, attacks, capec, elicitation, risk
from tldrisk.exceptions import DocumentParseError, NotFoundError, TldrError
from tldrisk.helpers import parse_document
from tldrisk.models import (
    Afd,
    AssessmentRow,
    AttackCatalog,
    ConsensusVector,
    PatternCatalog,
    SeverityModel,
    SubjectKindEnum,
)
from tldrisk.types.tldr import AssessmentOptions

logger = logging.getLogger(__name__)

CATALOG_FILE = "capec_subset.json"
ATTACKS_FILE = "attacks_mid.json"
CAPEC_ESTIMATES_FILE = "capec_estimates.json"
SEVERITY_ESTIMATES_FILE = "severity_estimates.json"
SEVERITY_MODEL_FILE = "severity_model.json"
# Remote directories cannot be listed, so their diagrams are fetched by name.
AFD_FILES = ("afd_mid.json", "afd_ct.json", "afd_mri.json", "afd_ultrasound.json")
AFD_FILE_PATTERN = "afd_*.json"

CACHE_NAME = "tldrisk_cache.sqlite"
CACHE_EXPIRE_AFTER = timedelta(hours=1)

class Loader():
    """
    Reads the pipeline's data documents from one directory.

    With no arguments the bundled `tldrisk/data/` files are used. `data_dir`
    points at a local directory laid out the same way, and `directory_url`
    at a remote one served over HTTP.
    """
    def __init__(self, data_dir=None, directory_url=None, is_cache_enabled=True):
        self.data_dir = Path(data_dir) if data_dir is not None else None
        self.directory_url = directory_url
        self.is_cache_enabled = is_cache_enabled
        self.session = None

        if self.data_dir is not None and self.directory_url is not None:
            raise TldrError("Give either a data directory or a directory URL, not both")

        if self.directory_url:
            if not self.directory_url.endswith("/"):
                self.directory_url += "/"
            self.init_http_client()

    @property
    def source(self) -> str:
        if self.directory_url:
            return self.directory_url
        if self.data_dir is not None:
            return str(self.data_dir)
        return "bundled data"

    def init_http_client(self):
        # Cached on disk for CACHE_EXPIRE_AFTER.
        if self.is_cache_enabled:
            self.session = CachedSession(
                cache_name=CACHE_NAME,
                expire_after=CACHE_EXPIRE_AFTER,
            )
        else:
            self.session = requests.Session()

    def _bundled(self):
        return resources.files("tldrisk").joinpath("data")

    def read_text(self, filename: str) -> str:
        """
        Reads one document from the configured source.

        Args:
            filename (str): File name inside the data directory, e.g. `attacks_mid.json`.

        Returns:
            text (str): The document text.
        """
        if self.session is not None:
            url = self.directory_url + filename
            logger.debug("Fetching %s", url)
            r = self.session.get(url)
            if r.status_code == 404:
                raise NotFoundError(f"no document at {url}", key=filename)
            try:
                r.raise_for_status()
            except requests.HTTPError as e:
                raise DocumentParseError(f"{url}: {e}") from e
            return r.text

        directory = self.data_dir if self.data_dir is not None else self._bundled()
        path = directory.joinpath(filename)
        if not path.is_file():
            raise NotFoundError(f"no document {filename} in {self.source}", key=filename)
        logger.debug("Reading %s", path)
        return path.read_text(encoding="utf-8")

    def list_afd_files(self) -> List[str]:
        if self.session is not None:
            return list(AFD_FILES)
        directory = self.data_dir if self.data_dir is not None else self._bundled()
        return sorted(
            entry.name for entry in directory.iterdir()
            if entry.is_file() and Path(entry.name).match(AFD_FILE_PATTERN)
        )

    def load_catalog(self) -> PatternCatalog:
        return capec.load_catalog(self.read_text(CATALOG_FILE))

    def load_attacks(self) -> AttackCatalog:
        return attacks.load_attacks(self.read_text(ATTACKS_FILE))

    def load_capec_consensus(self) -> ConsensusVector:
        vector = elicitation.load_consensus(self.read_text(CAPEC_ESTIMATES_FILE))
        if vector.kind != SubjectKindEnum.CAPEC_LIKELIHOOD:
            raise DocumentParseError(f"{CAPEC_ESTIMATES_FILE}: expected kind `capec`, got `{vector.kind.value}`")
        return vector

    def load_severity_consensus(self) -> List[ConsensusVector]:
        """
        Loads the severity consensus: a single vector, or an array with one vector per aspect.
        """
        text = self.read_text(SEVERITY_ESTIMATES_FILE)
        data = parse_document(text, label=SEVERITY_ESTIMATES_FILE)
        documents: Sequence = data if isinstance(data, list) else [data]
        vectors = [elicitation.load_consensus(document) for document in documents]
        wrong_kind = [v for v in vectors if v.kind != SubjectKindEnum.SEVERITY_MAGNITUDE]
        if wrong_kind:
            raise DocumentParseError(f"{SEVERITY_ESTIMATES_FILE}: every vector must be of kind `severity`")
        return vectors

    def load_severity_model(self) -> SeverityModel:
        try:
            text = self.read_text(SEVERITY_MODEL_FILE)
        except NotFoundError:
            logger.debug("No %s in %s; using the single-aspect model", SEVERITY_MODEL_FILE, self.source)
            return risk.DEFAULT_SEVERITY_MODEL
        return risk.load_severity_model(text)

    def load_afds(self) -> List[Afd]:
        return [afd.load_afd(self.read_text(filename)) for filename in self.list_afd_files()]

    def assess(self, options: AssessmentOptions = {}) -> List[AssessmentRow]:
        """
        Runs the full assessment over this loader's documents.

        Args:
            options (AssessmentOptions): Configuration options for override defaults.

        Returns:
            rows (List[AssessmentRow]): Globally ranked rows, one per attack.
        """
        return risk.run_assessment(
            attacks=self.load_attacks(),
            capec_consensus=self.load_capec_consensus(),
            severity_consensus=self.load_severity_consensus(),
            severity_model=self.load_severity_model(),
            options=options,
        )

def assess_bundled(options: AssessmentOptions = {}) -> List[AssessmentRow]:
    """Runs the assessment over the bundled medical imaging device data."""
    return Loader().assess(options=options)

def resolve_loader(data_dir: Optional[str] = None, is_cache_enabled: bool = True) -> Loader:
    """Picks a local or remote loader from a `--data-dir` value."""
    if data_dir is None:
        return Loader()
    if data_dir.startswith(("http://", "https://")):
        return Loader(directory_url=data_dir, is_cache_enabled=is_cache_enabled)
    return Loader(data_dir=data_dir)
