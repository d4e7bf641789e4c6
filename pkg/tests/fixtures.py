import pytest
import json
from tldrisk.data_loader import Loader

@pytest.fixture
def bundled_loader():
    return Loader()

@pytest.fixture
def pattern_catalog(bundled_loader):
    return bundled_loader.load_catalog()

@pytest.fixture
def attack_catalog(bundled_loader):
    return bundled_loader.load_attacks()

@pytest.fixture
def capec_consensus(bundled_loader):
    return bundled_loader.load_capec_consensus()

@pytest.fixture
def severity_consensus(bundled_loader):
    return bundled_loader.load_severity_consensus()

@pytest.fixture
def severity_model(bundled_loader):
    return bundled_loader.load_severity_model()

@pytest.fixture
def afds(bundled_loader):
    return bundled_loader.load_afds()

@pytest.fixture
def direct_surveys_document():
    path = "tests/fixtures/direct_surveys.json"
    with open(path, 'r') as f:
        data = json.load(f)

    return data

@pytest.fixture
def paired_vectors():
    path = "tests/fixtures/paired_t"
    with open(f"{path}/a.json", 'r') as f:
        a = json.load(f)
    with open(f"{path}/b.json", 'r') as f:
        b = json.load(f)
    with open(f"{path}/expected.json", 'r') as f:
        expected = json.load(f)

    return a, b, expected, path

# Published assessment of the bundled attacks: (likelihood, shifted likelihood, severity, risk)
# as printed, rounded to 3 decimals.
PUBLISHED_ASSESSMENT = {
    "A1":  (0.900, 0.770, 4.75, 3.658),
    "A2":  (0.750, 0.620, 4.75, 2.945),
    "A3":  (0.750, 0.620, 4.50, 2.790),
    "A4":  (0.725, 0.595, 4.50, 2.678),
    "A5":  (0.750, 0.620, 3.25, 2.015),
    "A6":  (0.600, 0.470, 4.25, 1.998),
    "A7":  (0.600, 0.470, 3.50, 1.645),
    "A8":  (0.600, 0.470, 3.50, 1.645),
    "A9":  (0.600, 0.470, 3.25, 1.528),
    "A10": (0.633, 0.503, 3.00, 1.509),
    "A11": (0.550, 0.420, 2.50, 1.050),
    "A12": (0.683, 0.553, 4.50, 2.489),
    "A13": (0.683, 0.553, 4.50, 2.489),
    "A14": (0.683, 0.553, 4.50, 2.489),
    "A15": (0.750, 0.620, 3.50, 2.170),
    "A16": (0.683, 0.553, 3.75, 2.074),
    "A17": (0.650, 0.520, 3.50, 1.820),
    "A18": (0.738, 0.608, 2.25, 1.367),
    "A19": (0.683, 0.553, 4.25, 2.352),
    "A20": (0.600, 0.470, 3.50, 1.645),
    "A21": (0.525, 0.395, 4.00, 1.580),
    "A22": (0.450, 0.320, 3.75, 1.200),
    "A23": (0.675, 0.545, 3.00, 1.635),
}
