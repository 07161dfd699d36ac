import json

import pytest

from hyst.corpus import schema_from_dict


@pytest.fixture
def product_schema():
    return schema_from_dict(
        {
            "columns": [
                {
                    "name": "BRAND",
                    "kind": "single",
                    "allowable_values": ["Spyder", "3Skull", "Halex", "Nike", "Adidas", "Sony", "Samsung"],
                },
                {
                    "name": "CATEGORY",
                    "kind": "multiple",
                    "allowable_values": ["paintball", "table tennis", "socks", "electronics", "archery"],
                },
                {"name": "PRICE", "kind": "numeric"},
            ]
        }
    )


@pytest.fixture
def restaurant_schema():
    return schema_from_dict(
        {
            "columns": [
                {
                    "name": "CATEGORY",
                    "kind": "multiple",
                    "allowable_values": ["Italian", "French", "Electronics", "Luxury Hotel"],
                },
                {"name": "LOCATION", "kind": "single", "allowable_values": ["New York", "Paris"]},
                {"name": "PRICE", "kind": "numeric"},
                {"name": "PARKING", "kind": "single", "allowable_values": ["Y", "N"]},
            ]
        }
    )


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    return path
