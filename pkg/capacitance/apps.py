from django.apps import AppConfig


class CapacitanceConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "capacitance"
    verbose_name = "Capacitance extraction"
