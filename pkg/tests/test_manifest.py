import json
from pathlib import Path

from attnsample import toy_weight_manifest
from attnsample.manifest import census_dict, constants_dict, write_shared

REPO_SHARED = Path(__file__).resolve().parent.parent / "shared"


class TestManifest:
    def test_constants_contents(self):
        c = constants_dict()
        assert c == {
            "T": 1000,
            "beta_schedule": "scaled_linear",
            "beta_start": 0.00085,
            "beta_end": 0.012,
        }

    def test_census_mirrors_weight_manifest(self):
        c = census_dict()
        assert c["format"] == "ZTH1"
        assert c["latent_shape"] == [16, 16, 3]
        assert c["weights"] == {
            name: list(shape) for name, shape in toy_weight_manifest().items()
        }

    def test_write_shared_roundtrip(self, tmp_path):
        write_shared(tmp_path)
        consts = json.loads((tmp_path / "constants.json").read_text())
        census = json.loads((tmp_path / "census.json").read_text())
        assert consts == constants_dict()
        assert census == census_dict()

    def test_repo_shared_files_are_current(self):
        # The checked-in interop files must stay in sync with the code.
        assert (REPO_SHARED / "constants.json").exists()
        assert json.loads(
            (REPO_SHARED / "constants.json").read_text()
        ) == constants_dict()
        assert json.loads((REPO_SHARED / "census.json").read_text()) == census_dict()
