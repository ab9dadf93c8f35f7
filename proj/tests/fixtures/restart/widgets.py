from framework import Base


class Plugin(Base):
    def name(self):
        return "plugin"


class Widget(Plugin.Component):
    def __init__(self, parent):
        self.parent = parent

    def render(self):
        canvas = self.canvas()
        canvas.draw(self.parent)
        return canvas


w = Widget(Plugin())
w.render()
