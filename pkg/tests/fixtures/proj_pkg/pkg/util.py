from . import core


class Helper:
    def wrap(self, engine: "core.Engine") -> bool:
        flag: bool = engine is not None
        return flag
