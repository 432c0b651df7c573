"""
URL configuration for dunes_project project.

Only the admin is routed: persisted comparison records are browsed there,
everything else runs through the `dunes` management command.
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('admin/', admin.site.urls),
]
