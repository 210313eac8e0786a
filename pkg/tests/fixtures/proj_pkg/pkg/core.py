class Engine:
    pass


class Gauge:
    pass


Reading = Dict[str, float]
