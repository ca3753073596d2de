"""Scene exceptions, shared by the grid, decoder and file modules."""


class SceneConfigError(Exception):
    pass


class SceneFormatError(Exception):
    pass
