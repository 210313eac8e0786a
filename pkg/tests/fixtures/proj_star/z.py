from y import Shared, YOnly


def relay(item: YOnly) -> Shared:
    packed: Tuple[Shared, YOnly] = (item, item)
    return packed[0]
