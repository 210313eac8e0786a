from a import IDMap


class Registry:
    pass


def build_map(entries: dict) -> IDMap:
    mapping: IDMap = IDMap(entries)
    return mapping


def count_entries(mapping):
    total = 0
    return total
