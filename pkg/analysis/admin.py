from django.contrib import admin

from .models import ComparisonRecord


@admin.register(ComparisonRecord)
class ComparisonRecordAdmin(admin.ModelAdmin):
    list_display = ['study', 'epsilon', 'order', 't', 'l1', 'l2', 'linf', 'runtime_s', 'steps', 'has_failed', 'created_at']
    list_filter = ['study', 'order', 'created_at']
    search_fields = ['study', 'config_digest', 'error']
    ordering = ['-created_at']
    readonly_fields = ['created_at']
    date_hierarchy = 'created_at'

    fieldsets = [
        ('Run', {
            'fields': ['study', 'config_digest', 'epsilon', 'order', 't']
        }),
        ('Norms', {
            'fields': ['l1', 'l2', 'linf']
        }),
        ('Cost', {
            'fields': ['runtime_s', 'steps']
        }),
        ('Failure', {
            'fields': ['error'],
            'classes': ['collapse']
        }),
        ('Metadata', {
            'fields': ['created_at'],
            'classes': ['collapse']
        }),
    ]

    def has_failed(self, obj):
        return obj.failed
    has_failed.short_description = 'Failed'
    has_failed.boolean = True
