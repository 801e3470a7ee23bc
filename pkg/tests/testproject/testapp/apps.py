from django.apps import AppConfig


class TestappConfig(AppConfig):
    name = 'testproject.testapp'
