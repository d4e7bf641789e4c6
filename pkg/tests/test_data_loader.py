import json
import shutil
import pytest
import requests
from pathlib import Path
from requests_cache import CachedSession
from tldrisk import risk
from tldrisk.data_loader import AFD_FILES, Loader, assess_bundled, resolve_loader
from tldrisk.exceptions import DocumentParseError, NotFoundError, TldrError
from tldrisk.models import SubjectKindEnum
from tests.fixtures import bundled_loader

DIRECTORY_URL = "http://data.example.test/tldr"
BUNDLED_DIR = Path("tldrisk/data")

@pytest.fixture()
def data_dir(tmp_path):
    path = tmp_path / "data"
    shutil.copytree(BUNDLED_DIR, path)
    return path

class StubSession():
    """Serves files from a local directory as if they were behind `DIRECTORY_URL`."""
    def __init__(self, directory, status_codes={}):
        self.directory = Path(directory)
        self.status_codes = status_codes
        self.requested = []

    def get(self, url):
        self.requested.append(url)
        filename = url.rsplit("/", 1)[-1]
        r = requests.Response()
        r.url = url
        r.encoding = "utf-8"
        path = self.directory / filename
        r.status_code = self.status_codes.get(filename, 200 if path.is_file() else 404)
        r.reason = "OK" if r.status_code == 200 else "Error"
        r._content = path.read_bytes() if r.status_code == 200 else b""
        return r

@pytest.fixture()
def make_remote_loader():
    def make(directory=BUNDLED_DIR, status_codes={}):
        loader = Loader(directory_url=DIRECTORY_URL, is_cache_enabled=False)
        loader.session = StubSession(directory, status_codes)
        return loader

    return make

def test_bundled_loader(bundled_loader):
    assert bundled_loader.source == "bundled data"
    assert len(bundled_loader.load_catalog().patterns) == 9
    assert len(bundled_loader.load_attacks().attacks) == 23
    assert bundled_loader.load_capec_consensus().kind == SubjectKindEnum.CAPEC_LIKELIHOOD
    assert [v.aspect for v in bundled_loader.load_severity_consensus()] == ["overall"]

def test_bundled_diagrams_are_sorted(bundled_loader):
    assert bundled_loader.list_afd_files() == sorted(AFD_FILES)
    assert sorted(d.id for d in bundled_loader.load_afds()) == [
        "generic_ct", "generic_mid", "generic_mri", "generic_ultrasound",
    ]

def test_local_directory_matches_bundled(data_dir):
    loader = Loader(data_dir=str(data_dir))
    assert loader.source == str(data_dir)
    assert loader.assess() == assess_bundled()

def test_missing_document_raises(data_dir):
    (data_dir / "attacks_mid.json").unlink()
    with pytest.raises(NotFoundError) as excinfo:
        Loader(data_dir=data_dir).load_attacks()
    assert excinfo.value.key == "attacks_mid.json"

def test_missing_severity_model_falls_back(data_dir):
    (data_dir / "severity_model.json").unlink()
    assert Loader(data_dir=data_dir).load_severity_model() == risk.DEFAULT_SEVERITY_MODEL

def test_severity_consensus_accepts_an_array(data_dir):
    path = data_dir / "severity_estimates.json"
    document = json.loads(path.read_text())
    privacy = {**document, "aspect": "privacy"}
    path.write_text(json.dumps([document, privacy]))

    vectors = Loader(data_dir=data_dir).load_severity_consensus()
    assert [v.aspect for v in vectors] == ["overall", "privacy"]

def test_wrong_consensus_kind_raises(data_dir):
    # Swap the likelihood and severity documents.
    shutil.copy(data_dir / "severity_estimates.json", data_dir / "capec_estimates.json")
    with pytest.raises(DocumentParseError, match="capec"):
        Loader(data_dir=data_dir).load_capec_consensus()

def test_remote_loader(make_remote_loader, bundled_loader):
    loader = make_remote_loader()
    assert loader.source == DIRECTORY_URL + "/"
    assert loader.load_attacks() == bundled_loader.load_attacks()
    assert len(loader.load_afds()) == len(AFD_FILES)
    assert loader.session.requested[0] == DIRECTORY_URL + "/attacks_mid.json"

def test_remote_not_found(make_remote_loader, tmp_path):
    loader = make_remote_loader(directory=tmp_path)
    with pytest.raises(NotFoundError):
        loader.load_catalog()
    assert loader.load_severity_model() == risk.DEFAULT_SEVERITY_MODEL

def test_remote_server_error(make_remote_loader):
    loader = make_remote_loader(status_codes={"capec_subset.json": 500})
    with pytest.raises(DocumentParseError, match="capec_subset.json"):
        loader.load_catalog()

def test_cached_session(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert isinstance(Loader(directory_url=DIRECTORY_URL).session, CachedSession)
    assert not isinstance(Loader(directory_url=DIRECTORY_URL, is_cache_enabled=False).session, CachedSession)

def test_data_dir_and_url_are_exclusive():
    with pytest.raises(TldrError):
        Loader(data_dir="data", directory_url=DIRECTORY_URL)

def test_resolve_loader(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert resolve_loader().source == "bundled data"
    assert resolve_loader("some/dir").data_dir == Path("some/dir")
    remote = resolve_loader("https://data.example.test/tldr/", is_cache_enabled=False)
    assert remote.directory_url == "https://data.example.test/tldr/"
    assert remote.session is not None
