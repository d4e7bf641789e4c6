import matplotlib
matplotlib.use("Agg")

import pytest
from tldrisk import cli
from tldrisk.data_presenter import generate_mapping_heatmap, generate_mapping_matrix, generate_risk_figure
from tldrisk.models import AttackCatalog
from tests.fixtures import attack_catalog, bundled_loader, pattern_catalog

def test_mapping_matrix(attack_catalog, pattern_catalog):
    matrix = generate_mapping_matrix(attack_catalog, pattern_catalog)
    assert matrix.shape == (23, 9)
    assert int(matrix.to_numpy().sum()) == 68
    assert list(matrix.columns) == list(pattern_catalog.patterns)
    assert matrix.loc["A1", "CAPEC-542"] == 1
    assert matrix.loc["A1"].sum() == 1

def test_mapping_matrix_without_catalog(attack_catalog):
    matrix = generate_mapping_matrix(attack_catalog)
    assert list(matrix.columns) == sorted(matrix.columns)
    assert matrix.shape == (23, 9)

def test_mapping_matrix_of_empty_catalog():
    assert generate_mapping_matrix(AttackCatalog()).empty

def test_risk_figure_is_saved(bundled_loader, tmp_path):
    path = tmp_path / "risk.png"
    fig = generate_risk_figure(bundled_loader.assess(), path=str(path))
    assert path.stat().st_size > 0
    ax = fig.axes[0]
    assert ax.get_xlabel() == "Likelihood (shifted)"
    assert [t.get_text() for t in ax.get_legend().get_texts()] == [
        "GenericMID", "GenericCT", "GenericMRI", "GenericUltrasound",
    ]

def test_risk_figure_without_rows(tmp_path):
    path = tmp_path / "empty.svg"
    generate_risk_figure([], path=str(path))
    assert path.exists()

def test_mapping_heatmap_is_saved(attack_catalog, pattern_catalog, tmp_path):
    path = tmp_path / "mapping.png"
    generate_mapping_heatmap(attack_catalog, pattern_catalog, path=str(path))
    assert path.stat().st_size > 0

@pytest.mark.parametrize("verb", ["assess", "compression"])
def test_cli_figure_flag(verb, tmp_path, capsys):
    path = tmp_path / f"{verb}.png"
    assert cli.main([verb, "--figure", str(path)]) == cli.EXIT_OK
    assert path.exists()
