import pytest

pytest.importorskip("torch")
pytest.importorskip("featreg_exporter")


@pytest.fixture(scope="session")
def alexnet_export(tmp_path_factory):
    """Export alexnet/fc6 once; the blob is ~244 MB so tests share it."""
    from featreg_exporter.export import export_weights

    d = tmp_path_factory.mktemp("alexnet")
    manifest = export_weights(
        "alexnet", "fc6", d / "a.netcfg", d / "a.w32", d / "a.json", seed=0
    )
    return d, manifest
