import numpy as np
import pytest

from cfeval.dataset import EmbeddingTable, FeatureSchema, FeatureSpec

OCCUPATION_SCHEMA = """\
features:
  - name: race
    kind: categorical
    vocabulary: [asian, black, white]
  - name: gender
    kind: categorical
    vocabulary: [male, female]
  - name: agegroup
    kind: categorical
    vocabulary: ["10-16", "17-34", "35-48", "49-90"]
"""

OCCUPATION_CSV = """\
race,gender,agegroup,label
white,female,10-16,1
asian,male,35-48,0
black,female,49-90,0
"""


@pytest.fixture
def occupation_files(tmp_path):
    schema = tmp_path / "schema.yaml"
    schema.write_text(OCCUPATION_SCHEMA)
    data = tmp_path / "data.csv"
    data.write_text(OCCUPATION_CSV)
    return data, schema


@pytest.fixture
def cat_schema():
    return FeatureSchema(
        [
            FeatureSpec.categorical("a", ["x", "y"]),
            FeatureSpec.categorical("b", ["p", "q", "r"]),
            FeatureSpec.categorical("c", ["u", "v", "w", "z"]),
        ]
    )


@pytest.fixture
def emb_table():
    rng = np.random.default_rng(0)
    tokens = ("good", "bad", "film", "plot", "<unk>")
    return EmbeddingTable(tokens, rng.normal(size=(5, 3)))


@pytest.fixture
def emb_schema(emb_table):
    return FeatureSchema([FeatureSpec.embedded(f"tok{j}", emb_table) for j in range(3)])
