from django.apps import AppConfig


class TheoryConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'theory'
    verbose_name = 'entropy theory checks'
