import pytest

from xlre.corpus import EntityMention, RelationAnnotation, RelationSchema, Sentence
from xlre.tokenizer import build_vocabulary

ACE_SCHEMA = RelationSchema(
    entity_types=("PER", "ORG", "GPE", "LOC"),
    relation_types=("Physical", "ORG-Affiliation", "Part-Whole", "Personal-Social",
                    "General-Affiliation", "Agent-Artifact"),
)

NYC_WORDS = "New York City is the most populous city in the United States .".split()


@pytest.fixture
def schema():
    return ACE_SCHEMA


@pytest.fixture
def nyc_sentence():
    return Sentence(
        "nyc", NYC_WORDS, "en",
        (EntityMention("m1", 1, 3, "GPE"), EntityMention("m2", 11, 12, "GPE")),
        (RelationAnnotation("m1", "m2", "Part-Whole"),),
    )


@pytest.fixture
def nyc_vocab(schema):
    return build_vocabulary([NYC_WORDS], 200, schema)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(results.items()):
            terminalreporter.write_line(line)
